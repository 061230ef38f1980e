#pragma once

#include <map>
#include <string>

#include "arr/util.hpp"

// Meta-prompt templates. These are artifact-owned assets: every store and run
// manifest pins their hashes so outputs stay attributable to exact wording.

namespace arr::templates {

inline constexpr const char* kVersion = "arr-templates-v1";

inline constexpr const char* kGenerate = R"(You are a rubric writer for pairwise preference data.
You are shown a prompt, the output a human preferred, and the output they did not prefer.
Decompose the reason for the preference into independent, verifiable quality axes.
Rules:
- Formulate each axis as a binary criterion checkable on a single candidate in isolation.
- Never use comparative language ("better than", "compared to") or refer to the other candidate.
- One criterion per line, starting with "- ".
Output only the criteria lines.)";

inline constexpr const char* kVerify = R"(You are a strict pairwise judge. Apply the rubric below as your only evaluation
protocol; ignore any preference you might have formed without it. Decide which
candidate better satisfies the rubric.
Finish with exactly one line: VERDICT: FIRST or VERDICT: SECOND.)";

inline constexpr const char* kRefine = R"(You are revising a rubric that failed an independent verification pass.
You are shown the prompt, the preferred and dispreferred outputs, the current rubric,
and the verifier's critique. Produce a corrected rubric that still decomposes the
preference into independent, verifiable, non-comparative criteria.
Output only the revised criteria lines, one per line, starting with "- ".)";

inline constexpr const char* kStructure = R"(You are consolidating verified per-instance rubrics into one hierarchical
evaluation protocol. Group related criteria by semantic granularity into named
dimensions (for example: overall alignment, compositional structure, fine-grained
fidelity), and give each dimension a one-sentence operationalization.
Emit the result as a fenced machine-readable block and nothing else inside the fences:
```json
{"dimensions":[{"name":"...","operationalization":"...","criteria":[{"text":"...","source_id":"..."}]}]}
```
Every criterion must carry the source_id of the rubric it came from. Prose outside
the fenced block is ignored.)";

inline constexpr const char* kEvaluate = R"(You are a pairwise preference judge. Evaluate the two candidates against the
rubric below, criterion by criterion, then decide which candidate better satisfies
the protocol overall. Judge content only; the presentation order carries no
information, and swapping the candidates must swap your verdict.
Finish with exactly one line: VERDICT: FIRST or VERDICT: SECOND.)";

inline constexpr const char* kTrajectoryEvaluate = R"(You are a pairwise judge for generated trajectories. Each candidate is the final
state of a generation process aiming at the given target. Apply the rubric below
if one is provided; otherwise judge closeness to the target per coordinate.
Finish with exactly one line: VERDICT: FIRST or VERDICT: SECOND.)";

// stage name -> fnv1a64 hex of the template text
inline std::map<std::string, std::string> hashes() {
  return {
      {"generate", to_hex(fnv1a64(kGenerate))},
      {"verify", to_hex(fnv1a64(kVerify))},
      {"refine", to_hex(fnv1a64(kRefine))},
      {"structure", to_hex(fnv1a64(kStructure))},
      {"evaluate", to_hex(fnv1a64(kEvaluate))},
      {"trajectory_evaluate", to_hex(fnv1a64(kTrajectoryEvaluate))},
      {"version", std::string(kVersion)},
  };
}

}  // namespace arr::templates

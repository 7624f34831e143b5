#pragma once
#include "lfpc/assay.hpp"

#include <cstdint>

namespace lfpc {

// Builds a random bioassay DAG that always passes validate_dag: every input
// slot filled once, every produced droplet consumed exactly once, split
// outputs feeding distinct consumers, no cycles. Same seed, same DAG.
// Dispenses draw only on the fluids stocked by the default chip
// ("sample", "reagent") so generated assays are always bindable.
BioassayDag generate_random_dag(uint64_t seed, int max_nodes);

} // namespace lfpc

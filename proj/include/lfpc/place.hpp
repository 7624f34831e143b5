#pragma once

#include "lfpc/architecture.hpp"
#include "lfpc/assay.hpp"
#include "lfpc/schedule.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lfpc {

// Concrete homes for every scheduled item.  Mix/Merge ops bind to mixers,
// Split/Detect/Store ops and parked droplets bind to storage cells,
// Dispense/Output ops bind to reservoirs.
struct Binding {
    std::map<std::string, std::string> site_of; // op id -> site or reservoir id
    std::vector<std::string> parked_site;       // parallel to Schedule::parked

    const std::string* find(const std::string& op_id) const {
        auto it = site_of.find(op_id);
        return it == site_of.end() ? nullptr : &it->second;
    }
};

struct BindResult {
    std::optional<Binding> binding;
    std::string error;

    bool ok() const { return binding.has_value(); }
};

// First-available placement over a fixed scan order: mixers MA1, MA2, MB1,
// MB2; storage cells SA1L, SA1R, SA2L, SA2R, then the Below group.  Port-
// hinted outputs bind first (they have no choice), un-hinted outputs and
// dispenses round-robin over their reservoir pools.  Items are processed in
// (start, id) order, so the result depends only on the schedule, never on
// protocol file line order.
BindResult bind_sites(const Schedule& sched, const BioassayDag& dag,
                      const ChipArchitecture& arch);

// Double-booking and kind-compatibility audit; empty result means sound.
std::vector<std::string> validate_binding(const Binding& b, const Schedule& sched,
                                          const BioassayDag& dag,
                                          const ChipArchitecture& arch);

} // namespace lfpc

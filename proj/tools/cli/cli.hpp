#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wdiff/types.hpp"

namespace wdiff::cli {

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kInputError = 2 };

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. The report JSON goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Evaluation grid used by verify-heatkernel when none is given: a 12 x 6
/// lattice in the (x1, x2) plane with spacing 0.5 and 1, offset so that it
/// never contains the origin.
std::vector<Vec> default_envelope_grid(int d);

}  // namespace wdiff::cli

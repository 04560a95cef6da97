#pragma once

#include <ostream>

namespace mfg {

/// Command-line entry point. Returns 0 on success, 2 when the run ends in a
/// diagnostic failure (non-contraction, singular mean-path system) and 1 on
/// input errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mfg

#pragma once

namespace sysid {

// Subcommands: generate, simulate, estimate, recover, bound, experiment, compare.
// Returns 0 on success, 2 on usage errors and 1 on runtime errors.
int cli_main(int argc, const char* const* argv);

}  // namespace sysid

#pragma once

namespace taxokit::cli {

// Full command-line front end: parses argv, dispatches to the subcommand,
// reports errors on stderr. Returns the process exit status.
int run_cli(int argc, char** argv);

}  // namespace taxokit::cli

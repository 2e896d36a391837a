#pragma once

#include <iosfwd>

namespace marn::cli {

// Runs one subcommand: synth | train-basis | build-memory | train-memory |
// caption | eval | gradcheck. Returns 0 on success, 1 on usage errors, 2 on
// data or format errors, 3 on numerical failures.
int dispatch(int argc, const char* const* argv);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace marn::cli

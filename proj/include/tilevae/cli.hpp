#pragma once

#include <iosfwd>

namespace tilevae {

/// Batch front-end. Returns 0 on success, 2 on usage errors and 1 when an
/// operation fails (message on `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tilevae

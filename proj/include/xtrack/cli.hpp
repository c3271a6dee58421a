#pragma once

namespace xtrack {

// Full command-line surface. Returns 0 on success, 1 when inputs or flags are
// invalid, 2 when a run fails underway (non-finite loss, failed
// certification, unwritable output).
int cli_main(int argc, const char* const* argv);

}  // namespace xtrack

#pragma once

namespace pvfx::cli {

// Entry point of the promptvfx command. Returns the process exit code:
// 0 success, 1 pipeline or runtime failure, 2 usage error.
int run(int argc, char** argv);

// Stops a running `serve` command.
void request_stop();

}  // namespace pvfx::cli

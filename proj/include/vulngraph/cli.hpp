#ifndef VULNGRAPH_CLI_HPP
#define VULNGRAPH_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace vulngraph::cli {

enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kInputError = 2,
    kDomainError = 3,
};

/// Runs the command line `args` (program name excluded). Normal output goes
/// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

} // namespace vulngraph::cli

#endif // VULNGRAPH_CLI_HPP

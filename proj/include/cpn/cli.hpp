#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpn::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 success, 1 domain error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count: `requested` if > 0, else CPN_JOBS, else the hardware thread count.
unsigned resolve_jobs(int requested);

/// "start:stop:count", log-spaced and inclusive.
std::vector<double> parse_frequency_scan(const std::string& spec);

/// Shortest text that is exact to 17 significant digits.
std::string csv_number(double value);

}  // namespace cpn::cli

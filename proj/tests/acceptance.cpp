// One line per acceptance criterion; exit status 1 if any is red.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "fracsus/acceptance.hpp"

int main(int argc, char** argv) {
  fracsus::AcceptanceOptions opts;
  for (int i = 1; i < argc; ++i) opts.only.push_back(std::atoi(argv[i]));
  int failed = 0;
  const auto results = fracsus::run_acceptance(opts, [&](const fracsus::CriterionResult& r) {
    std::printf("%s\n", fracsus::format_line(r).c_str());
    std::fflush(stdout);
    if (!r.pass()) ++failed;
  });
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}

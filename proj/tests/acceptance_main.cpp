#include <iostream>

#include "drps/acceptance.hpp"

int main() {
  bool all = true;
  for (const auto& r : drps::acceptance::run_all()) {
    std::cout << drps::acceptance::format_line(r) << std::endl;
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

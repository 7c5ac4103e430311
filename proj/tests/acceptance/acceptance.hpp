#pragma once

#include <functional>
#include <string>
#include <vector>

namespace dhrl::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::string title;
  std::function<Outcome()> run;
};

std::vector<Criterion> exact_criteria();
std::vector<Criterion> learning_criteria();

/// Wall-clock seconds since an arbitrary epoch.
double seconds();

}  // namespace dhrl::acceptance

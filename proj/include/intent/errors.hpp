#pragma once

#include <stdexcept>
#include <string>

namespace intent {

// File/format/content problems: missing datasets, corrupt headers, bad manifests.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or gradients; anything that should abort a numerical run.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace intent

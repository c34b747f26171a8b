#pragma once

#include <stdexcept>
#include <string>

namespace simmf {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a method does not apply to the dataset (e.g. a social
// recommender on a dataset without a user-user relation).
struct NotApplicableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace simmf

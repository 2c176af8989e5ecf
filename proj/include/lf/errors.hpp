#pragma once

#include <stdexcept>
#include <string>

namespace lf {

/// Base class for all errors raised by the load-flow library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedCase : Error { using Error::Error; };
struct UnsupportedFeature : Error { using Error::Error; };
struct NotRadial : Error { using Error::Error; };
struct BadTap : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };

struct RankDeficient : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct SingularHessian : Error { using Error::Error; };
struct SingularDirectionSystem : Error { using Error::Error; };
struct SingularJacobian : Error { using Error::Error; };

struct NonPositiveVoltage : Error { using Error::Error; };
struct DegenerateCone : Error { using Error::Error; };

struct LineSearchFailed : Error { using Error::Error; };
struct MaxIterExceeded : Error { using Error::Error; };
struct Diverged : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

}  // namespace lf

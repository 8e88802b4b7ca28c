#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace svi {

/// Base class for every error raised by the library.
///
/// Errors raised while driving a trajectory carry the index of the step that
/// failed; `integrate` attaches it before rethrowing.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}

  std::optional<long> step_index() const { return step_; }
  void set_step_index(long k) { step_ = k; }

 private:
  std::optional<long> step_;
};

#define SVI_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(what) {}      \
  }

SVI_DEFINE_ERROR(DimensionError);
SVI_DEFINE_ERROR(InvalidParameter);
SVI_DEFINE_ERROR(NonFiniteDerivative);
SVI_DEFINE_ERROR(NonFiniteState);
SVI_DEFINE_ERROR(UnsupportedOrder);
SVI_DEFINE_ERROR(UnsupportedModel);
SVI_DEFINE_ERROR(UnsupportedRegime);
SVI_DEFINE_ERROR(SingularJacobian);
SVI_DEFINE_ERROR(SingularMassMatrix);
SVI_DEFINE_ERROR(ConstraintDegeneracy);
SVI_DEFINE_ERROR(MissingHistory);
SVI_DEFINE_ERROR(WindowError);
SVI_DEFINE_ERROR(InsufficientData);
SVI_DEFINE_ERROR(ConfigError);

#undef SVI_DEFINE_ERROR

/// Newton iteration cap reached; carries the last residual norm.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace svi

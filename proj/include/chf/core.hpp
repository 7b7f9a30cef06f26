#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>

namespace chf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CHF_DECLARE_ERROR(Name)                  \
  class Name : public Error {                    \
   public:                                       \
    using Error::Error;                          \
  };

CHF_DECLARE_ERROR(ShapeError)
CHF_DECLARE_ERROR(IntegrationDiverged)
CHF_DECLARE_ERROR(DomainExit)
CHF_DECLARE_ERROR(InvalidOrder)
CHF_DECLARE_ERROR(ControllerDiverged)
CHF_DECLARE_ERROR(NetworkDiverged)
CHF_DECLARE_ERROR(OracleUnavailable)
CHF_DECLARE_ERROR(InvalidThreshold)
CHF_DECLARE_ERROR(InvalidConfig)
CHF_DECLARE_ERROR(NotPositiveDefinite)
CHF_DECLARE_ERROR(NeedMoreSamples)
CHF_DECLARE_ERROR(ConstructionError)
CHF_DECLARE_ERROR(UnknownExperiment)
CHF_DECLARE_ERROR(ParamError)
CHF_DECLARE_ERROR(IoError)

#undef CHF_DECLARE_ERROR

// Non-fatal diagnostics go through a replaceable sink (stderr by default).
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& msg);

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}


}  // namespace chf

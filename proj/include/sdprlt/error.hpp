#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace sdprlt {

// Base class for every failure raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SDPRLT_ERROR(Name)                                                     \
  struct Name : Error {                                                        \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {}      \
  }

SDPRLT_ERROR(NonFinite);
SDPRLT_ERROR(ShapeMismatch);
SDPRLT_ERROR(CornerMismatch);
SDPRLT_ERROR(NotPsd);
SDPRLT_ERROR(InvalidInstance);
SDPRLT_ERROR(EmptyBinarySet);
SDPRLT_ERROR(InvalidSparsity);
SDPRLT_ERROR(NotStrengthened);
SDPRLT_ERROR(Infeasible);
SDPRLT_ERROR(SingularSystem);
SDPRLT_ERROR(RetractionFailed);
SDPRLT_ERROR(RankDeficientP);
SDPRLT_ERROR(MaxNewtonIters);
SDPRLT_ERROR(CGBreakdown);
SDPRLT_ERROR(DescentViolated);
SDPRLT_ERROR(LeastSquaresSingular);
SDPRLT_ERROR(TimeLimit);
SDPRLT_ERROR(SubproblemStalled);
SDPRLT_ERROR(ParseError);
SDPRLT_ERROR(DuplicateEntry);
SDPRLT_ERROR(SizeMismatch);
SDPRLT_ERROR(TooLarge);
SDPRLT_ERROR(NoConvergence);

#undef SDPRLT_ERROR

// Short scientific rendering for error messages.
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace sdprlt

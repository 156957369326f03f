#include "retrofilter/errors.hpp"

namespace retrofilter {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Symmetry: return "symmetry";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::DegenerateStep: return "degenerate-step";
    case ErrorKind::EstimationFailure: return "estimation-failure";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void rethrow_with_context(const Error& e, std::string_view context) {
  std::string message(context);
  message += ": ";
  message += e.what();
  if (const auto* singular = dynamic_cast<const SingularityError*>(&e)) {
    throw SingularityError(message, singular->eigenvalue());
  }
  throw Error(e.kind(), message);
}

}  // namespace retrofilter

#include "magdmc/units.hpp"

#include <cmath>
#include <string>

namespace magdmc {

FieldStrength FieldStrength::from_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw DomainError("field strength beta must be positive and finite, got " + std::to_string(beta));
  return FieldStrength(beta);
}

FieldStrength FieldStrength::from_tesla(double b_tesla) {
  if (!(b_tesla > 0.0) || !std::isfinite(b_tesla))
    throw DomainError("magnetic field must be positive and finite, got " + std::to_string(b_tesla) + " T");
  return FieldStrength(b_tesla / kFieldUnitTesla);
}

FieldStrength beta_from_tesla(double b_tesla) { return FieldStrength::from_tesla(b_tesla); }

}  // namespace magdmc

#pragma once

#include <string>

#include "ropeid/dual.hpp"
#include "ropeid/errors.hpp"

namespace ropeid {

// The two identifiable physical parameters conditioning both the simulator
// and the policy.
struct MaterialParams {
    double youngs_modulus = 3000.0;  // Pa (sim-consistent units)
    double poissons_ratio = 0.35;    // dimensionless, in [0, 0.5)

    void validate() const {
        if (!(youngs_modulus > 0.0))
            throw precondition_error("MaterialParams: youngs_modulus must be > 0");
        if (!(poissons_ratio >= 0.0 && poissons_ratio < 0.5))
            throw precondition_error("MaterialParams: poissons_ratio must be in [0, 0.5)");
    }
};

template <class T>
struct LameCoefficients {
    T mu{};      // shear modulus
    T lambda{};  // first Lame parameter
};

// Standard linear-isotropic conversion mu = E/(2(1+nu)), lambda = E nu/((1+nu)(1-2nu)).
// Scalar-templated so tangent rollouts chain derivatives through it.
template <class T>
LameCoefficients<T> lame_from_material(const T& youngs, const T& poisson) {
    const double nu = primal(poisson);
    if (!(primal(youngs) > 0.0))
        throw precondition_error("lame_from_material: youngs_modulus must be > 0");
    if (nu >= 0.5 || nu <= -1.0)
        throw precondition_error("lame_from_material: singular material, poissons_ratio = " +
                                 std::to_string(nu));
    LameCoefficients<T> out;
    out.mu = youngs / (T(2) * (T(1) + poisson));
    out.lambda = youngs * poisson / ((T(1) + poisson) * (T(1) - T(2) * poisson));
    return out;
}

inline LameCoefficients<double> lame_from_material(const MaterialParams& p) {
    return lame_from_material<double>(p.youngs_modulus, p.poissons_ratio);
}

// Material with tangent seeds (1,0) on E and (0,1) on nu; the starting point
// of every tangent rollout.
inline void seed_material(const MaterialParams& p, Dual2& youngs, Dual2& poisson) {
    youngs = Dual2(p.youngs_modulus, 1.0, 0.0);
    poisson = Dual2(p.poissons_ratio, 0.0, 1.0);
}

}  // namespace ropeid

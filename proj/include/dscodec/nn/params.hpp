#pragma once

#include <string>
#include <vector>

#include "dscodec/ad/tensor.hpp"
#include "dscodec/util/random.hpp"

namespace dscodec::nn {

struct NamedParam {
    std::string name;
    ad::Var var;
};
using ParamList = std::vector<NamedParam>;

inline ad::Var make_param(ad::Shape shape) { return ad::Var::zeros(std::move(shape), true); }

// U(-bound, bound) in place.
void fill_uniform(ad::Var& v, util::Rng& rng, double bound);

void set_requires_grad(const ParamList& params, bool on);
void zero_grads(const ParamList& params);

}  // namespace dscodec::nn

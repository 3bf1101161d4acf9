#pragma once

#include "mfusion/models.hpp"
#include "mfusion/rng.hpp"

namespace mfusion::model::detail {

// uniform(+-1/sqrt(fan_in)) weight draw; the order of calls fixes the stream
num::Tensor uniform_init(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in);

void validate(const FLstmConfig& config);
void validate(const FTfConfig& config);

// register every parameter slot in the documented creation order
void flstm_create_params(num::ParamStore& store, const FLstmConfig& config, Rng& rng);
void ftf_create_params(num::ParamStore& store, const FTfConfig& config, Rng& rng);

}  // namespace mfusion::model::detail

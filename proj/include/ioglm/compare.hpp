// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ioglm/corpus.hpp"
#include "ioglm/gate.hpp"
#include "ioglm/model.hpp"
#include "ioglm/training.hpp"

namespace ioglm {

struct VariantRow {
  GateVariant variant = GateVariant::input_only;
  std::size_t parameters = 0;
  /// Gate parameters beyond the input_only gate of the same D_g.
  long long delta_vs_input_only = 0;
  double valid_ppl = 0.0;
  double test_ppl = 0.0;
};

struct VariantComparison {
  double base_valid_ppl = 0.0;
  double base_test_ppl = 0.0;
  std::vector<VariantRow> rows;

  /// Tab-separated table with a header line.
  std::string to_table() const;
  std::string to_json() const;
};

/// Trains every variant on the same frozen base with the same config and
/// seed, then scores validation and test perplexity.
VariantComparison run_variant_comparison(const LMParams<float> &base,
                                         const TokenStream &train,
                                         const TokenStream &valid,
                                         const TokenStream &test,
                                         const std::vector<GateVariant> &variants,
                                         const TrainConfig &config);

} // namespace ioglm

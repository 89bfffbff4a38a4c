// SPDX-License-Identifier: Apache-2.0
#include "ioglm/compare.hpp"

#include <cstdio>
#include <stdexcept>

#include "ioglm/eval.hpp"

namespace ioglm {

namespace {
std::string num(double x, const char *fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}
} // namespace

std::string VariantComparison::to_table() const {
  std::string s = "variant\tparameters\tdiff\tvalid_ppl\ttest_ppl\n";
  s += "base\t-\t-\t" + num(base_valid_ppl, "%.3f") + '\t' + num(base_test_ppl, "%.3f") + '\n';
  for (const auto &r : rows) {
    const std::string diff = r.delta_vs_input_only == 0
                                 ? "-"
                                 : (r.delta_vs_input_only > 0 ? "+" : "") +
                                       std::to_string(r.delta_vs_input_only);
    s += to_string(r.variant) + '\t' + std::to_string(r.parameters) + '\t' + diff + '\t' +
         num(r.valid_ppl, "%.3f") + '\t' + num(r.test_ppl, "%.3f") + '\n';
  }
  return s;
}

std::string VariantComparison::to_json() const {
  std::string s = "{\"base\":{\"valid_ppl\":" + num(base_valid_ppl) +
                  ",\"test_ppl\":" + num(base_test_ppl) + "},\"variants\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &r = rows[i];
    if (i) s += ',';
    s += "{\"variant\":\"" + to_string(r.variant) +
         "\",\"parameters\":" + std::to_string(r.parameters) +
         ",\"diff\":" + std::to_string(r.delta_vs_input_only) +
         ",\"valid_ppl\":" + num(r.valid_ppl) + ",\"test_ppl\":" + num(r.test_ppl) + "}";
  }
  return s + "]}";
}

VariantComparison run_variant_comparison(const LMParams<float> &base,
                                         const TokenStream &train,
                                         const TokenStream &valid,
                                         const TokenStream &test,
                                         const std::vector<GateVariant> &variants,
                                         const TrainConfig &config) {
  if (variants.empty()) throw std::invalid_argument("variant comparison: no variants given");

  VariantComparison out;
  EvalOptions eo;
  eo.threads = config.threads;
  out.base_valid_ppl = perplexity<float>(base, nullptr, valid, eo).perplexity;
  out.base_test_ppl = perplexity<float>(base, nullptr, test, eo).perplexity;

  auto reference_cfg = config;
  reference_cfg.gate_variant = GateVariant::input_only;
  const auto reference =
      IOGParams<float>::zeros(gate_config_for(base, reference_cfg)).parameter_count();

  for (GateVariant v : variants) {
    auto cfg = config;
    cfg.gate_variant = v;
    auto gate = init_gate<float>(gate_config_for(base, cfg), cfg.seed);
    auto trained = train_iog(cfg, train, valid, base, std::move(gate));
    VariantRow row;
    row.variant = v;
    row.parameters = trained.best.parameter_count();
    row.delta_vs_input_only =
        static_cast<long long>(row.parameters) - static_cast<long long>(reference);
    row.valid_ppl = perplexity<float>(base, &trained.best, valid, eo).perplexity;
    row.test_ppl = perplexity<float>(base, &trained.best, test, eo).perplexity;
    out.rows.push_back(row);
  }
  return out;
}

} // namespace ioglm

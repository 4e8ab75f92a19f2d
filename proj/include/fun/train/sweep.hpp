#pragma once

// Accuracy under input-channel masking for a list of keep-count specs.

#include <ostream>
#include <string>
#include <vector>

#include "fun/compression.hpp"
#include "fun/train/trainer.hpp"

namespace fun::train {

struct MaskReport {
  CompressionSpec spec;
  int channels_active = 0;
  double accuracy = 0.0;
  std::int64_t pruned_param_count = 0;
};

inline const std::vector<CompressionSpec>& default_sweep_specs() {
  static const std::vector<CompressionSpec> specs = {
      {64, 64, 64}, {64, 12, 12}, {44, 10, 10}, {32, 8, 8}, {14, 5, 5}};
  return specs;
}

// "64/64/64;64/12/12" or "64,12,12;..." (';' or whitespace separated).
inline std::vector<CompressionSpec> parse_spec_list(const std::string& text) {
  std::vector<CompressionSpec> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(CompressionSpec::parse(cur));
    cur.clear();
  };
  for (char c : text) {
    if (c == ';' || c == ' ' || c == '\t' || c == '\n') flush();
    else cur += c;
  }
  flush();
  require(!out.empty(), ErrorKind::spec, "empty spec list");
  return out;
}

template <class T>
std::vector<MaskReport> compression_sweep(arch::Model<T>& model, const TensorSplit& split,
                                          const std::vector<CompressionSpec>& specs) {
  require(model.spec().input.is_full(), ErrorKind::config, "sweeps need a model with 192 input channels");
  std::vector<MaskReport> rows;
  for (const auto& s : specs) {
    s.validate();
    rows.push_back({s, s.channels(), evaluate(model, split, s), pruned_param_count(model.spec(), s)});
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<MaskReport>& rows) {
  os << "keep_y,keep_cb,keep_cr,channels,top1,params\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.accuracy);
    os << r.spec.keep_y << "," << r.spec.keep_cb << "," << r.spec.keep_cr << "," << r.channels_active << "," << buf
       << "," << r.pruned_param_count << "\n";
  }
}

}  // namespace fun::train

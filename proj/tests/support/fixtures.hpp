#pragma once

#include <cstdint>
#include <vector>

#include "anatomia/prior.hpp"
#include "anatomia/splits.hpp"
#include "anatomia/ssl.hpp"
#include "anatomia/synthdata.hpp"

namespace fixture {

inline anatomia::SynthConfig small_synth(std::int64_t side) {
  anatomia::SynthConfig cfg;
  cfg.image_size = {side, side};
  return cfg;
}

// In-memory split of consecutive synthetic cases: labeled, unlabeled, test.
inline anatomia::DatasetSplit synthetic_split(int n_labeled, int n_unlabeled, int n_test, std::int64_t side = 32) {
  const auto cfg = small_synth(side);
  anatomia::DatasetSplit split;
  int index = 0;
  for (int i = 0; i < n_labeled; ++i, ++index) {
    auto c = anatomia::generate_case(cfg, index);
    split.labeled.push_back({c.volume, *c.label});
  }
  for (int i = 0; i < n_unlabeled; ++i, ++index) split.unlabeled.push_back(anatomia::generate_case(cfg, index).volume);
  for (int i = 0; i < n_test; ++i, ++index) {
    auto c = anatomia::generate_case(cfg, index);
    split.test.push_back({c.volume, *c.label});
  }
  return split;
}

inline anatomia::ArchConfig tiny_dae_arch(int classes, std::int64_t side) {
  auto a = anatomia::default_dae_arch(classes, {side, side}, 16);
  a.base_width = 4;
  a.depth = 2;
  a.convs_per_level = 1;
  return a;
}

// A few-second SSL setup on 16x16 patches.
inline anatomia::SslConfig tiny_ssl(anatomia::Strategy strategy, std::int64_t t_max = 20) {
  anatomia::SslConfig cfg;
  cfg.strategy = strategy;
  cfg.arch = anatomia::default_segnet_arch(2, 2, strategy);
  cfg.arch.base_width = 4;
  cfg.arch.depth = 2;
  cfg.arch.convs_per_level = 1;
  cfg.patch_size = {16, 16};
  cfg.infer_stride = {8, 8};
  cfg.t_max = t_max;
  return cfg;
}

inline anatomia::Network tiny_dae(std::uint64_t seed = 3, std::int64_t side = 16) {
  anatomia::Rng rng(seed);
  return anatomia::Network::autoencoder(tiny_dae_arch(2, side), rng);
}

}  // namespace fixture

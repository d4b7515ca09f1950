// Naive serial forward pass kept alongside the tape implementation.
//
// This path shares no kernel code with ser::ad / ser::lin: every product and
// softmax is an explicit scalar loop, and padded slots are physically absent
// from the sequence instead of masked. It serves as the independent oracle
// for the tape forward, for attribution finite differences, and as the serial
// baseline in the kernel benchmark.
#pragma once

#include <vector>

#include "ser/model.hpp"

namespace ser::ref {

using lin::Matrix;

// Materialized embedding rows for one observation; finite-difference oracles
// perturb these directly.
struct Inputs {
  struct Day {
    // One row per live event, canonical order.
    std::vector<std::vector<double>> subj, act, obj;
  };
  std::vector<double> cls_daily;
  std::vector<double> cls_weekly;
  std::vector<double> stock;
  std::vector<Day> days;
};

Inputs materialize(const ModelConfig& cfg, const ModelParams& params,
                   const FirmPeriodObservation& obs, int32_t stock_index);

double forward(const ModelConfig& cfg, const ModelParams& params, const Inputs& in);

double forward_obs(const ModelConfig& cfg, const ModelParams& params,
                   const FirmPeriodObservation& obs, int32_t stock_index);

}  // namespace ser::ref

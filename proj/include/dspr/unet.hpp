#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dspr/autodiff.hpp"

namespace dspr {

/// Encoder/decoder filter counts of the five-down, five-up generator.
struct UNetSpec {
  std::vector<Index> encoder_filters{16, 32, 64, 128, 128};
  std::vector<Index> decoder_filters{128, 128, 64, 32, 16};
  double leaky_slope = 0.2;
  Index input_channels = 1;
  Index output_channels = 1;

  void validate() const;
  /// Spatial dims must be multiples of this (2^depth).
  Index granularity() const { return Index{1} << encoder_filters.size(); }
  friend bool operator==(const UNetSpec&, const UNetSpec&) = default;
};

/// Named feature tap: e1..e5 (encoder stage outputs) or d1..d5 (decoder).
struct StageId {
  bool decoder = false;
  int index = 1;  // 1-based

  static StageId parse(const std::string& name);
  std::string name() const;
  friend bool operator==(const StageId&, const StageId&) = default;
};

template <typename Scalar>
struct ParamTensor {
  std::string name;
  std::string stage;
  Tensor4<Scalar> value;
};

/// Generator parameters in build order. Convolutions feeding batch norm
/// carry no bias (the normalization would cancel it); the output head and
/// nothing else does.
template <typename Scalar>
struct NetworkParameters {
  UNetSpec spec;
  std::vector<ParamTensor<Scalar>> tensors;

  Index count() const;
};

template <typename Scalar>
NetworkParameters<Scalar> build_unet(const UNetSpec& spec, std::uint64_t seed);

/// Pushes every parameter tensor onto the tape as a leaf, in build order.
template <typename Scalar>
std::vector<Var> bind_parameters(Tape<Scalar>& tape, const NetworkParameters<Scalar>& params,
                                 bool requires_grad);

/// Records f_theta(z) on the tape. z is (1, in_c, H, W) with H, W >= 32;
/// inputs that are not multiples of 32 are zero-padded and the output is
/// cropped back. If `stage_outputs` is given it receives the ten stage
/// activations (e1..e5, d1..d5).
template <typename Scalar>
Var forward(Tape<Scalar>& tape, const UNetSpec& spec, std::span<const Var> params, Var z,
            std::vector<Var>* stage_outputs = nullptr);

/// Tape-free evaluation.
template <typename Scalar>
Tensor4<Scalar> forward(const NetworkParameters<Scalar>& params, const Tensor4<Scalar>& z);

template <typename Scalar>
std::vector<Tensor4<Scalar>> capture_activations(const NetworkParameters<Scalar>& params,
                                                 const Tensor4<Scalar>& z,
                                                 const std::vector<std::string>& taps);

/// Versioned binary checkpoint ("UNET").
template <typename Scalar>
void save_checkpoint(const NetworkParameters<Scalar>& params, const std::filesystem::path& path);

template <typename Scalar>
NetworkParameters<Scalar> load_checkpoint(const std::filesystem::path& path);

}  // namespace dspr

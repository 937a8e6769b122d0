// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "megnet/optim.hpp"

namespace megnet {

// "MEGW" weight file, little-endian:
//   magic[4] version:u16 flags:u16 (bit 0: Adam state follows)
//   variant:u16 n_channels n_latent filter_len n_times pool_factor pool_stride n_classes: u32
//   dropout_rate:f64 l1_lambda:f64
//   tensors in declaration order (spatial, temporal, temporal_bias,
//   out_weights, out_bias), each as count:u64 then f64 values
//   [adam step:u64, first moments, second moments in the same order]
constexpr std::uint16_t kModelFileVersion = 1;

std::vector<std::uint8_t> encode_model(const Model& model, bool with_optimizer_state = true);
Model decode_model(std::span<const std::uint8_t> bytes);

void write_model(const std::filesystem::path& path, const Model& model, bool with_optimizer_state = true);
Model read_model(const std::filesystem::path& path);

}  // namespace megnet

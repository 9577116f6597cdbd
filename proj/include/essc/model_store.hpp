#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "essc/hht.hpp"
#include "essc/nn.hpp"
#include "essc/optim.hpp"

namespace essc::model_store {

inline constexpr char kModelMagic[8] = {'E', 'S', 'S', 'C', 'M', 'D', '0', '1'};
inline constexpr char kAutoencoderMagic[8] = {'E', 'S', 'S', 'C', 'A', 'E', '0', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kFlagAdamState = 1u << 0;

struct LoadedModel {
  nn::Network network;
  std::optional<optim::AdamState> adam;
};

std::vector<std::uint8_t> save(const nn::Network& net, const optim::AdamState* adam = nullptr);
LoadedModel load(std::span<const std::uint8_t> bytes);

void save_file(const std::filesystem::path& path, const nn::Network& net, const optim::AdamState* adam = nullptr);
LoadedModel load_file(const std::filesystem::path& path);

std::vector<std::uint8_t> save_autoencoder(const hht::Autoencoder& ae);
hht::Autoencoder load_autoencoder(std::span<const std::uint8_t> bytes);

void save_autoencoder_file(const std::filesystem::path& path, const hht::Autoencoder& ae);
hht::Autoencoder load_autoencoder_file(const std::filesystem::path& path);

}  // namespace essc::model_store

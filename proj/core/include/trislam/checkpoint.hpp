#pragma once

#include <memory>
#include <string>

#include "trislam/render_loss.hpp"
#include "trislam/submap_manager.hpp"

namespace trislam {

// Checkpoint = text manifest (field config, submap metadata, one line per
// block: name length learning_rate) + raw little-endian float64 values in
// manifest order.
void save_checkpoint(const std::string& manifest_path, const std::string& bin_path,
                     const ParamStore& store, const SubMapManager& manager);

/// A reconstructed field: parameters, submaps and decoders ready for
/// querying (mesh extraction, depth evaluation).
struct LoadedCheckpoint {
  ParamStore store;
  std::unique_ptr<SubMapManager> manager;
  std::unique_ptr<Decoders> decoders;
  BlockId beta_block = -1;
  FieldConfig field_cfg;

  SceneField field() const { return SceneField{manager.get(), decoders.get(), beta_block}; }
};

LoadedCheckpoint load_checkpoint(const std::string& manifest_path, const std::string& bin_path);

}  // namespace trislam

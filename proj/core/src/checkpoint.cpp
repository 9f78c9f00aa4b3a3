#include "trislam/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trislam {

namespace {
// x86-type little-endian layout assumed for the raw float64 stream.
static_assert(sizeof(double) == 8, "checkpoint format needs 8-byte doubles");

void write_doubles(std::ofstream& out, const std::vector<double>& xs) {
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& xs) {
  in.read(reinterpret_cast<char*>(xs.data()),
          static_cast<std::streamsize>(xs.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated binary stream");
}
}  // namespace

void save_checkpoint(const std::string& manifest_path, const std::string& bin_path,
                     const ParamStore& store, const SubMapManager& manager) {
  std::ofstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot write checkpoint manifest: " + manifest_path);
  const FieldConfig& fc = manager.field_config();
  manifest << "format trislam-checkpoint-1\n";
  manifest << "levels " << fc.levels << "\n";
  manifest << "base_res " << fc.base_res << "\n";
  manifest << "feat_dim " << fc.feat_dim << "\n";
  manifest << "hidden_dim " << fc.hidden_dim << "\n";
  manifest << "lr_hash " << fc.lr_hash << "\n";
  manifest << "grid_hash " << (fc.grid_hash ? 1 : 0) << "\n";
  manifest << "threshold_p " << manager.threshold() << "\n";
  manifest << "expansion_l " << manager.expansion() << "\n";
  manifest.precision(17);
  for (std::size_t i = 0; i < manager.size(); ++i) {
    const SubMap& sm = manager.submap(i);
    const Aabb& b = sm.bounds();
    manifest << "submap " << sm.creation_index() << " " << b.min.x() << " " << b.min.y() << " "
             << b.min.z() << " " << b.max.x() << " " << b.max.y() << " " << b.max.z() << " "
             << sm.n_max() << " " << sm.table_size() << "\n";
  }
  for (std::size_t i = 0; i < store.block_count(); ++i) {
    const ParamBlock& blk = store.block(static_cast<BlockId>(i));
    manifest << "block " << blk.name << " " << blk.size() << " " << blk.learning_rate << "\n";
  }
  if (!manifest) throw std::runtime_error("write failed: " + manifest_path);

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint data: " + bin_path);
  for (std::size_t i = 0; i < store.block_count(); ++i)
    write_doubles(bin, store.block(static_cast<BlockId>(i)).values);
  if (!bin) throw std::runtime_error("write failed: " + bin_path);
}

LoadedCheckpoint load_checkpoint(const std::string& manifest_path, const std::string& bin_path) {
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot open checkpoint manifest: " + manifest_path);

  LoadedCheckpoint ck;
  double threshold_p = 0.2, expansion_l = 0.5;
  struct BlockLine {
    std::string name;
    std::size_t length;
    double lr;
  };
  std::vector<BlockLine> block_lines;
  std::vector<Aabb> submap_bounds;

  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "trislam-checkpoint-1")
        throw std::runtime_error("unsupported checkpoint format: " + fmt);
    } else if (key == "levels") {
      ls >> ck.field_cfg.levels;
    } else if (key == "base_res") {
      ls >> ck.field_cfg.base_res;
    } else if (key == "feat_dim") {
      ls >> ck.field_cfg.feat_dim;
    } else if (key == "hidden_dim") {
      ls >> ck.field_cfg.hidden_dim;
    } else if (key == "lr_hash") {
      ls >> ck.field_cfg.lr_hash;
    } else if (key == "grid_hash") {
      int flag = 0;
      ls >> flag;
      ck.field_cfg.grid_hash = flag != 0;
    } else if (key == "threshold_p") {
      ls >> threshold_p;
    } else if (key == "expansion_l") {
      ls >> expansion_l;
    } else if (key == "submap") {
      int index;
      Aabb b;
      int n_max;
      std::int64_t table;
      ls >> index >> b.min.x() >> b.min.y() >> b.min.z() >> b.max.x() >> b.max.y() >> b.max.z() >>
          n_max >> table;
      submap_bounds.push_back(b);
    } else if (key == "block") {
      BlockLine bl;
      ls >> bl.name >> bl.length >> bl.lr;
      block_lines.push_back(bl);
    } else {
      throw std::runtime_error("checkpoint manifest: unknown key '" + key + "'");
    }
    if (!ls) throw std::runtime_error("checkpoint manifest: malformed line '" + line + "'");
  }

  // Rebuild the structure; every random init is overwritten by the load.
  Rng dummy(0);
  ck.manager = std::make_unique<SubMapManager>(threshold_p, expansion_l, ck.field_cfg);
  for (const Aabb& b : submap_bounds) ck.manager->restore_submap(b, ck.store, dummy);
  ck.decoders = std::make_unique<Decoders>(
      ck.store, ck.field_cfg.levels * ck.field_cfg.feat_dim, ck.field_cfg.hidden_dim, 1e-3, dummy);
  ck.beta_block = add_beta_block(ck.store, 10.0, 1e-3);

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open checkpoint data: " + bin_path);
  for (const BlockLine& bl : block_lines) {
    BlockId id = ck.store.find(bl.name);
    if (id < 0) id = ck.store.add_block(bl.name, bl.length, bl.lr);  // e.g. keyframe poses
    ParamBlock& blk = ck.store.block(id);
    if (blk.size() != bl.length)
      throw std::runtime_error("checkpoint: size mismatch for block '" + bl.name + "'");
    blk.learning_rate = bl.lr;
    read_doubles(bin, blk.values);
  }
  return ck;
}

}  // namespace trislam

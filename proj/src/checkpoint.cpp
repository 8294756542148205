#include "nav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace nav {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts are unsupported");

using nlohmann::json;

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_f32s(std::ostream& out, const std::vector<double>& xs) {
  std::vector<float> buf(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) buf[i] = static_cast<float>(xs[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_f32s(std::istream& in, std::vector<double>& xs) {
  std::vector<float> buf(xs.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  for (size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(buf[i]);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& mp, const CheckpointMeta& meta) {
  json header;
  header["config"] = meta.cfg.to_json();
  header["flags"] = {{"no_ist", meta.flags.no_ist},
                     {"no_gas", meta.flags.no_gas},
                     {"no_st", meta.flags.no_st}};
  header["iteration"] = meta.iteration;
  header["seed"] = meta.seed;
  header["adam_steps"] = mp.store.adam_steps();
  json params = json::array();
  for (int pid = 0; pid < mp.store.count(); ++pid) {
    const auto& p = mp.store.at(pid);
    params.push_back({{"name", p.name}, {"shape", p.shape}});
  }
  header["params"] = params;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (int pid = 0; pid < mp.store.count(); ++pid) write_f32s(out, mp.store.at(pid).value);
  for (int pid = 0; pid < mp.store.count(); ++pid) write_f32s(out, mp.store.at(pid).m);
  for (int pid = 0; pid < mp.store.count(); ++pid) write_f32s(out, mp.store.at(pid).v);
  if (!out) throw IoError("short write while saving checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + "): " + path);
  const std::uint32_t hlen = read_u32(in);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw IoError("truncated checkpoint header: " + path);
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& ex) {
    throw IoError("corrupt checkpoint header: " + std::string(ex.what()));
  }

  LoadedCheckpoint lc;
  lc.meta.cfg = RunConfig::from_json(header.at("config"));
  lc.meta.flags.no_ist = header.at("flags").at("no_ist").get<bool>();
  lc.meta.flags.no_gas = header.at("flags").at("no_gas").get<bool>();
  lc.meta.flags.no_st = header.at("flags").at("no_st").get<bool>();
  lc.meta.iteration = header.at("iteration").get<int>();
  lc.meta.seed = header.at("seed").get<std::uint64_t>();

  lc.mp = ModelParams::init(lc.meta.cfg.model_dims(), 0);
  const auto& plist = header.at("params");
  if (static_cast<int>(plist.size()) != lc.mp.store.count())
    throw IoError("checkpoint parameter list does not match the configured architecture");
  for (int pid = 0; pid < lc.mp.store.count(); ++pid) {
    auto& p = lc.mp.store.at(pid);
    if (plist[static_cast<size_t>(pid)].at("name").get<std::string>() != p.name ||
        plist[static_cast<size_t>(pid)].at("shape").get<std::vector<int>>() != p.shape)
      throw IoError("checkpoint parameter '" + p.name + "' does not match the configured shape");
  }
  for (int pid = 0; pid < lc.mp.store.count(); ++pid) read_f32s(in, lc.mp.store.at(pid).value);
  for (int pid = 0; pid < lc.mp.store.count(); ++pid) read_f32s(in, lc.mp.store.at(pid).m);
  for (int pid = 0; pid < lc.mp.store.count(); ++pid) read_f32s(in, lc.mp.store.at(pid).v);
  if (!in) throw IoError("truncated checkpoint payload: " + path);
  lc.mp.store.set_adam_steps(header.at("adam_steps").get<std::int64_t>());
  return lc;
}

void require_flag_compatibility(const AblationFlags& trained, const AblationFlags& requested) {
  auto bad = [](bool t, bool r) { return t && !r; };
  if (bad(trained.no_ist, requested.no_ist) || bad(trained.no_gas, requested.no_gas) ||
      bad(trained.no_st, requested.no_st))
    throw ShapeError(
        "requested flags enable a mechanism the checkpoint was trained without; add the matching "
        "ablation flag or re-train");
}

}  // namespace nav

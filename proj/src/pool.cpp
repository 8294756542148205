#include "nav/pool.hpp"

#include <filesystem>

namespace nav {

namespace {

constexpr std::uint64_t kHouseSalt = 0x10000000ULL;
constexpr std::uint64_t kUnseenHouseSalt = 0x20000000ULL;
constexpr std::uint64_t kTrainEpSalt = 0x30000000ULL;
constexpr std::uint64_t kSeenEpSalt = 0x40000000ULL;
constexpr std::uint64_t kUnseenEpSalt = 0x50000000ULL;

// A usable house must both generate and contain at least one episode within
// the hop bounds; scan the derived seed stream until one appears.
HouseGraph usable_house(const RunConfig& cfg, std::uint64_t base, int house_id) {
  const EnvGenConfig gen = cfg.gen_config();
  const EpisodeConfig epc = cfg.episode_config();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t hseed =
        mix_seed(base, static_cast<std::uint64_t>(house_id) * 1000ULL + static_cast<std::uint64_t>(attempt));
    HouseGraph h;
    try {
      h = generate_house(gen, hseed);
    } catch (const GenerationError&) {
      continue;
    }
    h.id = house_id;
    try {
      (void)sample_episode(h, epc, 0);
    } catch (const GenerationError&) {
      continue;
    }
    return h;
  }
  throw GenerationError("generate_pool: could not produce a usable house " +
                        std::to_string(house_id) + "; adjust env config");
}

std::vector<Episode> make_episodes(const std::vector<HouseGraph>& houses, const RunConfig& cfg,
                                   std::uint64_t salt, std::uint64_t seed, int count) {
  const EpisodeConfig epc = cfg.episode_config();
  std::vector<Episode> eps;
  for (int e = 0; e < count; ++e) {
    const HouseGraph& h = houses[static_cast<size_t>(e) % houses.size()];
    Episode ep = sample_episode(h, epc, mix_seed(seed, salt + static_cast<std::uint64_t>(e)));
    ep.id = e;
    eps.push_back(std::move(ep));
  }
  return eps;
}

}  // namespace

EnvPool generate_pool(const RunConfig& cfg, std::uint64_t seed) {
  EnvPool pool;
  for (int i = 0; i < cfg.env.train_houses; ++i)
    pool.train.houses.push_back(usable_house(cfg, mix_seed(seed, kHouseSalt), i));
  for (int i = 0; i < cfg.env.unseen_houses; ++i)
    pool.val_unseen.houses.push_back(
        usable_house(cfg, mix_seed(seed, kUnseenHouseSalt), cfg.env.train_houses + i));

  pool.train.episodes =
      make_episodes(pool.train.houses, cfg, kTrainEpSalt, seed, cfg.env.train_episodes);
  pool.val_seen.houses = pool.train.houses;
  pool.val_seen.episodes =
      make_episodes(pool.val_seen.houses, cfg, kSeenEpSalt, seed, cfg.env.val_seen_episodes);
  pool.val_unseen.episodes =
      make_episodes(pool.val_unseen.houses, cfg, kUnseenEpSalt, seed, cfg.env.val_unseen_episodes);

  pool.train.bind();
  pool.val_seen.bind();
  pool.val_unseen.bind();
  return pool;
}

void save_pool(const EnvPool& pool, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  save_split(pool.train, "train", out_dir + "/train.json");
  save_split(pool.val_seen, "val_seen", out_dir + "/val_seen.json");
  save_split(pool.val_unseen, "val_unseen", out_dir + "/val_unseen.json");
}

EnvPool load_pool(const std::string& dir) {
  EnvPool pool;
  pool.train = load_split(dir + "/train.json");
  pool.val_seen = load_split(dir + "/val_seen.json");
  pool.val_unseen = load_split(dir + "/val_unseen.json");
  return pool;
}

}  // namespace nav

#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "spikekit/dat_codec.hpp"
#include "spikekit/image_io.hpp"
#include "spikekit/reconstruction.hpp"
#include "support.hpp"

using namespace spikekit;
namespace fs = std::filesystem;

namespace {

struct Run
{
  int code = -1;
  std::string out;
  std::map<std::string, std::string> kv;
};

Run run(const std::string& args)
{
  const std::string cmd = std::string(SPIKEKIT_BIN) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && line[0] != '#')
      r.kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return r;
}

std::string q(const fs::path& p)
{
  return "'" + p.string() + "'";
}

// Writes a directory with `n` constant images of the given level.
fs::path image_dir(const fs::path& root, std::uint8_t level, std::size_t n = 1,
                   std::size_t h = 8, std::size_t w = 12)
{
  fs::create_directories(root);
  for (std::size_t k = 0; k < n; ++k)
    write_pgm(GrayImage(h, w, level), root / ("img_" + std::to_string(k) + ".pgm"));
  return root;
}

} // namespace

TEST_CASE("usage errors exit with 2")
{
  CHECK(run("").code == 2);
  CHECK(run("no-such-command").code == 2);
  CHECK(run("simulate").code == 2);
  CHECK(run("reconstruct x.dat --method bogus --out y.pgm").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("simulate")
{
  testing::TempDir tmp("cli");

  SUBCASE("black image has no spikes")
  {
    image_dir(tmp / "black", 0);
    const Run r = run("simulate " + q(tmp / "black") + " " + q(tmp / "out"));
    REQUIRE(r.code == 0);
    CHECK(r.kv.at("total_spikes") == "0");
    CHECK(r.kv.at("frames") == "255");
    CHECK(fs::file_size(tmp / "out.dat") == 255u * 12); // 96 bits per frame
    CHECK(read_meta(tmp / "out.info").height == 8);
  }
  SUBCASE("level 128 over 255 steps fires 128 times per pixel")
  {
    image_dir(tmp / "gray", 128);
    const Run r = run("simulate " + q(tmp / "gray") + " " + q(tmp / "out") + " --repeats 255");
    REQUIRE(r.code == 0);
    CHECK(r.kv.at("min_count_per_pixel") == "128");
    CHECK(r.kv.at("max_count_per_pixel") == "128");
    CHECK(r.kv.at("total_spikes") == std::to_string(128 * 96));
    CHECK(r.kv.at("config.repeats") == "255");
  }
  SUBCASE("two images are concatenated in name order")
  {
    image_dir(tmp / "two", 255, 2);
    const Run r = run("--quiet simulate " + q(tmp / "two") + " " + q(tmp / "out") + " --repeats 10");
    REQUIRE(r.code == 0);
    CHECK(r.kv.at("frames") == "20");
    CHECK(r.kv.count("config.repeats") == 0);
  }
  SUBCASE("missing directory is a runtime failure")
  {
    CHECK(run("simulate " + q(tmp / "absent") + " " + q(tmp / "out")).code == 1);
  }
}

TEST_CASE("reconstruct")
{
  testing::TempDir tmp("cli");
  image_dir(tmp / "scene", 100, 1, 8, 16);
  REQUIRE(run("simulate " + q(tmp / "scene") + " " + q(tmp / "s")).code == 0);
  const fs::path dat = tmp / "s.dat";

  SUBCASE("tfp output matches the library and gamma 1 is a no-op")
  {
    REQUIRE(run("reconstruct " + q(dat) + " --out " + q(tmp / "a.pgm")).code == 0);
    REQUIRE(run("reconstruct " + q(dat) + " --gamma 1 --out " + q(tmp / "b.pgm")).code == 0);
    const GrayImage a = read_pgm(tmp / "a.pgm");
    CHECK(a == read_pgm(tmp / "b.pgm"));
    const SpikeStream s = read_dat(dat, read_meta(tmp / "s.info"));
    CHECK(a == tfp(s, 0, 255).pixels);
    CHECK(a(0, 0) == 100);
  }
  SUBCASE("ground truth comparison")
  {
    const Run r = run("reconstruct " + q(dat) + " --out " + q(tmp / "a.png") + " --gt " +
                      q(tmp / "scene" / "img_0.pgm"));
    REQUIRE(r.code == 0);
    CHECK(r.kv.at("psnr_db") == "inf");
    CHECK(std::stod(r.kv.at("ssim")) == doctest::Approx(1.0));
    CHECK(read_png(tmp / "a.png")(3, 3) == 100);
  }
  SUBCASE("tfi on a stream that fires every step is white")
  {
    StreamMeta meta;
    meta.height = 3;
    meta.width = 5;
    const std::vector<std::uint8_t> ones(meta.geometry(20).total_bytes(), 0xFF);
    const SpikeStream all = from_packed(ones, meta.geometry(20));
    write_dat(all, tmp / "all.dat");
    write_meta(meta, tmp / "all.info");
    REQUIRE(run("reconstruct " + q(tmp / "all.dat") + " --method tfi --out " + q(tmp / "w.pgm")).code == 0);
    const GrayImage white = read_pgm(tmp / "w.pgm");
    for (auto p : white.pixels())
      CHECK(p == 255);
  }
  SUBCASE("stride writes a numbered sequence")
  {
    const Run r = run("reconstruct " + q(dat) + " --window 50 --stride 100 --out " + q(tmp / "seq.pgm"));
    REQUIRE(r.code == 0);
    CHECK(r.kv.at("images") == "3"); // starts 0, 100, 200
    CHECK(fs::exists(tmp / "seq_00000.pgm"));
    CHECK(fs::exists(tmp / "seq_00002.pgm"));
  }
}

TEST_CASE("play and serve")
{
  testing::TempDir tmp("cli");
  StreamMeta meta;
  meta.height = 10;
  meta.width = 16;
  write_dat(random_stream(meta.geometry(400), 3), tmp / "r.dat");
  write_meta(meta, tmp / "r.info");
  const std::string dat = q(tmp / "r.dat");

  SUBCASE("no tasks drops every piece")
  {
    const Run r = run("play " + dat + " --rate 200000 --t-cusum 40 --block-frames 40 --tasks none");
    REQUIRE(r.code == 0);
    CHECK(r.kv.at("produced") == "10");
    CHECK(r.kv.at("dropped") == "10");
    CHECK(r.kv.at("conserved") == "true");
  }
  SUBCASE("count task with a log")
  {
    const Run r = run("--json play " + dat + " --rate 100000 --t-cusum 40 --block-frames 40 --tasks count --log");
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    const auto& res = doc.at("result");
    CHECK(res.at("produced").get<int>() == 10);
    CHECK(res.at("delivered").get<int>() + res.at("dropped").get<int>() == 10);
    const auto log = res.at("log").at("count").get<std::vector<std::uint64_t>>();
    CHECK(std::is_sorted(log.begin(), log.end()));
  }
  SUBCASE("bad rate and bad task names")
  {
    CHECK(run("play " + dat + " --rate 0").code == 2);
    CHECK(run("play " + dat + " --tasks fly").code == 2);
    CHECK(run("play " + dat + " --remote 127.0.0.1:1").code == 2);
  }
  SUBCASE("block stream file round trip")
  {
    const Run s = run("serve " + dat + " --unpaced --block-frames 25 --output " + q(tmp / "r.blk"));
    REQUIRE(s.code == 0);
    CHECK(s.kv.at("blocks") == "16");
    const Run p = run("--meta " + q(tmp / "r.info") + " play --blocks " + q(tmp / "r.blk") +
                      " --rate 1 --t-cusum 100 --tasks count");
    REQUIRE(p.code == 0);
    CHECK(p.kv.at("frames") == "400");
    CHECK(p.kv.at("produced") == "4");
    CHECK(p.kv.at("gap_events") == "0");
  }
}

TEST_CASE("inspect")
{
  testing::TempDir tmp("cli");
  StreamMeta meta;
  meta.height = 4;
  meta.width = 4;
  const std::vector<std::uint8_t> ones(meta.geometry(10).total_bytes(), 0xFF);
  const SpikeStream full = from_packed(ones, meta.geometry(10));
  write_dat(full, tmp / "full.dat");
  write_dat(from_packed(std::vector<std::uint8_t>(meta.geometry(10).total_bytes(), 0), meta.geometry(10)),
            tmp / "empty.dat");
  write_meta(meta, tmp / "m.info");

  const Run a = run("--meta " + q(tmp / "m.info") + " inspect " + q(tmp / "full.dat") + " --bins 4");
  REQUIRE(a.code == 0);
  CHECK(a.kv.at("density") == "1");
  CHECK(a.kv.at("total_spikes") == "160");
  CHECK(a.kv.at("frame_density_histogram") == "0,0,0,10");
  CHECK(a.kv.at("duration_ms") == "0.25");

  const Run b = run("--meta " + q(tmp / "m.info") + " inspect " + q(tmp / "empty.dat") + " --bins 4");
  REQUIRE(b.code == 0);
  CHECK(b.kv.at("density") == "0");
  CHECK(b.kv.at("frame_density_histogram") == "10,0,0,0");

  CHECK(run("inspect " + q(tmp / "full.dat")).code == 1); // no sidecar
}

TEST_CASE("bench json")
{
  const Run r = run("--json bench --synthetic --frames 2000 --height 20 --width 40 --rate-sweep 100000 "
                    "--t-cusum 100 --block-frames 100");
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  const auto& points = doc.at("result").at("points");
  REQUIRE(points.size() == 1);
  CHECK(points[0].at("produced").get<int>() == 20);
  CHECK(points[0].at("conserved").get<bool>());
  CHECK(doc.at("result").at("ceiling").at("requested_fps") == "max");
  CHECK(run("bench --rate-sweep 10,abc --frames 10").code == 2);
}

TEST_CASE("dataset")
{
  testing::TempDir tmp("cli");
  testing::make_dataset(tmp / "set", {6, 10, 3, 2});
  const Run r = run("dataset " + q(tmp / "set") + " --manifest " + q(tmp / "set.manifest"));
  REQUIRE(r.code == 0);
  CHECK(r.kv.at("samples") == "3");
  CHECK(r.kv.at("label_type") == "raw");
  CHECK(r.kv.at("warnings").find("seq_2") != std::string::npos);
  CHECK(fs::exists(tmp / "set.manifest"));
  CHECK(run("dataset " + q(tmp / "nothing")).code == 1);
}

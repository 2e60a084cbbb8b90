// ======================================================================== //
// Copyright 2026 The ExaBricks-CPU Authors                                 //
//                                                                          //
// Licensed under the Apache License, Version 2.0 (the "License");          //
// you may not use this file except in compliance with the License.         //
// You may obtain a copy of the License at                                  //
//                                                                          //
//     http://www.apache.org/licenses/LICENSE-2.0                           //
//                                                                          //
// Unless required by applicable law or agreed to in writing, software      //
// distributed under the License is distributed on an "AS IS" BASIS,        //
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. //
// See the License for the specific language governing permissions and      //
// limitations under the License.                                           //
// ======================================================================== //


// exabricks: command line front end.
//   generate  synthetic AMR cells -> .exacells
//   build     .exacells -> brick/region artifact, prints statistics
//   info      statistics of an artifact
//   render    one frame -> PNG (+ stats JSON)
//   bench     orbit benchmark -> CSV (view,ms,regions,samples)
//   serve     WebSocket frame-streaming service

#include "exa/io/artifact.hpp"
#include "exa/io/exacells.hpp"
#include "exa/io/image.hpp"
#include "exa/io/json.hpp"
#include "exa/io/synthetic.hpp"
#include "exa/service/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace exa;

namespace {

  constexpr int kExitOk = 0;
  constexpr int kExitUsage = 1;
  constexpr int kExitData = 2;

  struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  std::vector<double> parse_list(const std::string &s, char sep, size_t count, const std::string &what)
  {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
      try {
        size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception &) {
        throw UsageError("bad " + what + " '" + s + "'");
      }
    }
    if (out.size() != count) throw UsageError("bad " + what + " '" + s + "': expected " + std::to_string(count) + " values");
    return out;
  }

  vec3d parse_vec(const std::string &s, const std::string &what)
  {
    const auto v = parse_list(s, ',', 3, what);
    return {v[0], v[1], v[2]};
  }

  std::pair<int, int> parse_res(const std::string &s)
  {
    const auto v = parse_list(s, 'x', 2, "resolution");
    if (v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[0] > 16384 || v[1] > 16384)
      throw UsageError("bad resolution '" + s + "'");
    return {int(v[0]), int(v[1])};
  }

  vec3i parse_extent(const std::string &s)
  {
    std::vector<double> v;
    if (s.find('x') == std::string::npos) {
      const double n = parse_list(s, 'x', 1, "extent")[0];
      v = {n, n, n};
    } else {
      v = parse_list(s, 'x', 3, "extent");
    }
    return vec3i(int(v[0]), int(v[1]), int(v[2]));
  }

  TransferFunction default_tf(const SceneData &data, size_t field)
  {
    auto [lo, hi] = data.model.valueRange(field);
    if (!(lo < hi)) hi = lo + 1.f;
    return TransferFunction::linear_ramp(lo, hi, 0.5f);
  }

  io::json stats_json(const SceneData &data)
  {
    const BrickStats bs = brick_stats(data.model);
    const RegionStats rs = region_stats(data.regions);
    io::json levels = io::json::array();
    for (const auto &[level, cells] : bs.cellsPerLevel)
      levels.push_back({{"level", level}, {"cells", cells}, {"bricks", bs.bricksPerLevel.at(level)}});
    return {{"cells", data.model.cellCount},
            {"bricks", bs.numBricks},
            {"regions", rs.numRegions},
            {"avgBricksPerRegionByCount", rs.avgBricksByCount},
            {"avgBricksPerRegionByVolume", rs.avgBricksByVolume},
            {"maxBricksPerRegion", rs.maxBricks},
            {"minBrickDims", {bs.minDims.x, bs.minDims.y, bs.minDims.z}},
            {"maxBrickDims", {bs.maxDims.x, bs.maxDims.y, bs.maxDims.z}},
            {"meanBrickDims", {bs.meanDims.x, bs.meanDims.y, bs.meanDims.z}},
            {"levels", levels},
            {"hasKdTree", data.kdTree.has_value()}};
  }

  void print_stats(const SceneData &data, bool asJson)
  {
    const io::json s = stats_json(data);
    if (asJson) {
      std::cout << s.dump(2) << "\n";
      return;
    }
    std::cout << std::left;
    std::cout << std::setw(34) << "#cells" << s["cells"] << "\n"
              << std::setw(34) << "#bricks" << s["bricks"] << "\n"
              << std::setw(34) << "#regions" << s["regions"] << "\n"
              << std::setw(34) << "avg #bricks/region (by count)" << std::fixed << std::setprecision(3)
              << s["avgBricksPerRegionByCount"].get<double>() << "\n"
              << std::setw(34) << "avg #bricks/region (by volume)" << s["avgBricksPerRegionByVolume"].get<double>()
              << "\n"
              << std::setw(34) << "max #bricks/region" << s["maxBricksPerRegion"] << "\n";
    for (const auto &l : s["levels"])
      std::cout << "  level " << l["level"] << ": " << l["cells"] << " cells in " << l["bricks"] << " bricks\n";
  }

  std::optional<size_t> field_index(const SceneData &data, const std::string &name)
  {
    if (name.empty()) return 0;
    for (size_t f = 0; f < data.model.fieldNames.size(); ++f)
      if (data.model.fieldNames[f] == name) return f;
    return std::nullopt;
  }

  struct RenderOptions {
    std::string artifact;
    std::string tfPath;
    std::string field;
    std::string pos, look, up = "0,1,0";
    double fov = 45.0;
    std::string res = "512x512";
    std::optional<double> iso;
    double rateScale = 1.0;
    double samplesPerCell = 2.0;
    std::string gradient = "analytic";
    std::vector<std::string> clip;
    uint64_t seed = 0;
    std::string sampler = "regions";
    std::string mode = "basis";
    int threads = 0;
  };

  void add_render_flags(CLI::App *cmd, RenderOptions &o)
  {
    cmd->add_option("--tf", o.tfPath, "transfer function JSON {domain:[lo,hi], rgba:[[r,g,b,a] x 256]}");
    cmd->add_option("--field", o.field, "field name (default: first field)");
    cmd->add_option("--rate-scale", o.rateScale, "sampling rate factor")->check(CLI::PositiveNumber);
    cmd->add_option("--samples-per-cell", o.samplesPerCell, "base samples per finest cell")->check(CLI::PositiveNumber);
    cmd->add_option("--gradient", o.gradient, "analytic|central|clampedCentral|none");
    cmd->add_option("--seed", o.seed, "interleaved sampling seed");
    cmd->add_option("--threads", o.threads, "render threads (0: all cores)")->check(CLI::NonNegativeNumber);
  }

  MarchParams march_params(const RenderOptions &o)
  {
    MarchParams p;
    p.rateScale = o.rateScale;
    p.samplesPerCell = o.samplesPerCell;
    const auto mode = parse_gradient_mode(o.gradient);
    if (!mode) throw UsageError("unknown gradient mode '" + o.gradient + "'");
    p.gradientMode = *mode;
    p.interleavedSeed = o.seed;
    p.threads = o.threads;
    for (const auto &c : o.clip) {
      const auto v = parse_list(c, ',', 4, "clip plane");
      const vec3d n(v[0], v[1], v[2]);
      if (!(length(n) > 0.0)) throw UsageError("clip plane normal must be non-zero");
      p.clipPlanes.push_back({n, v[3]});
    }
    if (o.sampler == "regions") p.sampler = SamplerPath::regions;
    else if (o.sampler == "celllocation") p.sampler = SamplerPath::cellLocation;
    else throw UsageError("unknown sampler '" + o.sampler + "'");
    if (o.mode == "basis") p.reconstruction = Reconstruction::basis;
    else if (o.mode == "nearest") p.reconstruction = Reconstruction::nearest;
    else throw UsageError("unknown mode '" + o.mode + "'");
    p.validate();
    return p;
  }

  std::shared_ptr<const Scene> load_scene(const RenderOptions &o, std::shared_ptr<const SceneData> &data)
  {
    data = io::load_artifact(o.artifact);
    const auto field = field_index(*data, o.field);
    if (!field) throw UsageError("unknown field '" + o.field + "'");
    const TransferFunction tf = o.tfPath.empty() ? default_tf(*data, *field) : io::load_tf(o.tfPath);
    return Scene::create(data, tf, o.iso, *field);
  }

  int cmd_generate(const io::SyntheticSpec &spec, const std::string &out)
  {
    const CellSet cells = io::generate_synthetic(spec);
    io::save_cells(out, cells);
    std::cout << "wrote " << cells.size() << " cells to " << out << "\n";
    return kExitOk;
  }

  int cmd_build(const std::string &in, const std::string &out, const BrickBuildParams &params, bool asJson)
  {
    const CellSet cells = io::load_cells(in);
    const auto data = make_scene_data(cells, params);
    io::save_artifact(out, *data);
    print_stats(*data, asJson);
    return kExitOk;
  }

  int cmd_render(const RenderOptions &o, const std::string &out, const std::string &statsPath, bool raw)
  {
    const MarchParams params = march_params(o);
    std::shared_ptr<const SceneData> data;
    const auto scene = load_scene(o, data);
    if (params.sampler == SamplerPath::cellLocation && !data->kdTree)
      throw UsageError("--sampler celllocation needs an artifact built with --keep-kdtree");
    const auto [w, h] = parse_res(o.res);
    Camera cam;
    if (o.pos.empty() != o.look.empty()) throw UsageError("--pos and --look must be given together");
    if (o.pos.empty()) {
      cam = orbit_camera(data->supportBounds, 0, 1, o.fov, w, h);
      cam.up = parse_vec(o.up, "up vector");
    } else {
      cam = Camera::look_at(parse_vec(o.pos, "position"), parse_vec(o.look, "look-at point"),
                            parse_vec(o.up, "up vector"), o.fov, w, h);
    }
    if (!cam.valid()) throw UsageError("invalid camera (check --pos/--look/--up/--fov)");
    Frame frame = render_frame(*scene, cam, params);
    frame.stats.bvhRebuildMs = scene->rebuildMs;
    if (raw) io::write_raw_rgba(out, frame.rgba);
    else io::write_png(out, frame.width, frame.height, frame.rgba);
    const std::string stats = io::stats_to_json(frame.stats).dump();
    if (statsPath.empty()) std::cout << stats << "\n";
    else io::write_file(statsPath, stats + "\n");
    return kExitOk;
  }

  int cmd_bench(const RenderOptions &o, const std::string &benchMode, int orbit, const std::string &csvPath)
  {
    RenderOptions ro = o;
    if (benchMode == "region") ro.sampler = "regions";
    else if (benchMode == "celllocation") ro.sampler = "celllocation";
    else throw UsageError("unknown bench mode '" + benchMode + "'");
    const MarchParams params = march_params(ro);
    std::shared_ptr<const SceneData> data;
    const auto scene = load_scene(ro, data);
    if (params.sampler == SamplerPath::cellLocation && !data->kdTree)
      throw UsageError("celllocation mode needs an artifact built with --keep-kdtree");
    const auto [w, h] = parse_res(ro.res);

    std::ofstream file;
    if (!csvPath.empty()) {
      file.open(csvPath);
      if (!file) throw std::runtime_error("cannot open '" + csvPath + "' for writing");
    }
    std::ostream &csv = csvPath.empty() ? std::cout : file;
    csv << "view,ms,regions,samples\n";
    for (int v = 0; v < orbit; ++v) {
      const Camera cam = orbit_camera(data->supportBounds, v, orbit, ro.fov, w, h);
      const Frame frame = render_frame(*scene, cam, params);
      csv << v << "," << std::fixed << std::setprecision(3) << frame.stats.ms << "," << frame.stats.regions << ","
          << frame.stats.samples << "\n";
      csv.flush();
    }
    return kExitOk;
  }

  int cmd_serve(const RenderOptions &o, const service::ServerOptions &serverOptions)
  {
    std::shared_ptr<const SceneData> data;
    const auto scene = load_scene(o, data);
    MarchParams params = march_params(o);
    auto state = std::make_shared<service::SessionState>(data, scene->tf, o.iso, params);
    try {
      service::RenderServer server(state, serverOptions);
      boost::asio::signal_set signals(server.context(), SIGINT, SIGTERM);
      signals.async_wait([&](const boost::system::error_code &ec, int) {
        if (!ec) server.stop();
      });
      std::cout << "serving on ws://" << serverOptions.host << ":" << server.port() << " (health: /health)"
                << std::endl;
      server.run();
      std::cout << "shut down after " << state->framesServed() << " frame(s)" << std::endl;
    } catch (const service::PortInUseError &e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitData;
    }
    return kExitOk;
  }

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"exabricks: bricks, active brick regions and volume rendering for cell-centered AMR"};
  app.set_config("--config", "", "read options from an INI/TOML config file");
  app.require_subcommand(1);

  // generate
  io::SyntheticSpec spec;
  std::string fieldName = "gaussian", extent = "64", genOut;
  auto *gen = app.add_subcommand("generate", "write a synthetic AMR cell list");
  gen->add_option("--field", fieldName, "gaussian|ramp|turbulence|constant");
  gen->add_option("--extent", extent, "domain size in finest cells, N or NxMxK");
  gen->add_option("--max-level", spec.maxLevel, "coarsest level");
  gen->add_option("--threshold", spec.threshold, "refine while |grad f| * cell width >= threshold (inf: never)");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--holes", spec.holeFraction, "fraction of leaf cells dropped");
  gen->add_option("--jumps", spec.jumpFraction, "fraction of unrefined cells split two levels at once");
  gen->add_option("--value", spec.constantValue, "value of the constant field");
  gen->add_option("out", genOut, "output .exacells")->required();

  // build
  std::string buildIn, buildOut;
  BrickBuildParams buildParams;
  bool buildJson = false;
  auto *build = app.add_subcommand("build", "brick a cell list and compute its active brick regions");
  build->add_option("in", buildIn, "input .exacells")->required();
  build->add_option("out", buildOut, "output artifact")->required();
  build->add_flag("--keep-kdtree", buildParams.keepKdTree, "retain the bricking k-d tree (cell-location baseline)");
  build->add_option("--max-brick-width", buildParams.maxBrickWidth)->check(CLI::PositiveNumber);
  build->add_flag("--json", buildJson, "print statistics as JSON");

  // info
  std::string infoIn;
  bool infoJson = false;
  auto *info = app.add_subcommand("info", "print artifact statistics");
  info->add_option("artifact", infoIn)->required();
  info->add_flag("--json", infoJson);

  // render
  RenderOptions ro;
  std::string renderOut, statsPath;
  bool raw = false;
  auto *render = app.add_subcommand("render", "render one frame");
  render->add_option("artifact", ro.artifact)->required();
  add_render_flags(render, ro);
  render->add_option("--pos", ro.pos, "camera position x,y,z");
  render->add_option("--look", ro.look, "look-at point x,y,z");
  render->add_option("--up", ro.up, "up vector x,y,z");
  render->add_option("--fov", ro.fov, "vertical field of view in degrees");
  render->add_option("--res", ro.res, "WxH");
  render->add_option("--iso", ro.iso, "iso-surface value");
  render->add_option("--clip", ro.clip, "clip plane nx,ny,nz,d keeping dot(n,x) <= d (repeatable, max 6)");
  render->add_option("--sampler", ro.sampler, "regions|celllocation");
  render->add_option("--mode", ro.mode, "basis|nearest");
  render->add_option("--out", renderOut, "output PNG")->required();
  render->add_option("--stats", statsPath, "write stats JSON here instead of stdout");
  render->add_flag("--raw", raw, "write headerless RGBA8 instead of PNG");

  // bench
  RenderOptions bo;
  std::string benchMode = "region", csvPath;
  int orbit = 8;
  auto *bench = app.add_subcommand("bench", "orbit benchmark, CSV view,ms,regions,samples");
  bench->add_option("artifact", bo.artifact)->required();
  add_render_flags(bench, bo);
  bench->add_option("--mode", benchMode, "region|celllocation");
  bench->add_option("--orbit", orbit, "number of viewpoints")->check(CLI::PositiveNumber);
  bench->add_option("--res", bo.res, "WxH");
  bench->add_option("--fov", bo.fov);
  bench->add_option("--csv", csvPath, "write CSV here instead of stdout");

  // serve
  RenderOptions so;
  service::ServerOptions serverOptions;
  auto *serve = app.add_subcommand("serve", "run the frame-streaming service");
  serve->add_option("artifact", so.artifact)->required();
  add_render_flags(serve, so);
  serve->add_option("--iso", so.iso);
  serve->add_option("--port", serverOptions.port);
  serve->add_option("--host", serverOptions.host);
  serve->add_option("--io-threads", serverOptions.threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      const auto f = io::parse_synthetic_field(fieldName);
      if (!f) throw UsageError("unknown field '" + fieldName + "'");
      spec.field = *f;
      spec.extent = parse_extent(extent);
      try {
        spec.validate();
      } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
      }
      return cmd_generate(spec, genOut);
    }
    if (*build) return cmd_build(buildIn, buildOut, buildParams, buildJson);
    if (*info) {
      print_stats(*io::load_artifact(infoIn), infoJson);
      return kExitOk;
    }
    if (*render) return cmd_render(ro, renderOut, statsPath, raw);
    if (*bench) return cmd_bench(bo, benchMode, orbit, csvPath);
    if (*serve) return cmd_serve(so, serverOptions);
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidCellsError &e) {
    std::cerr << "error: " << e.what();
    return kExitData;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

// gsc: command-line front end for the Gaussian splat codec.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "gsc/codec.hpp"
#include "gsc/errors.hpp"
#include "gsc/synth.hpp"

namespace fs = std::filesystem;
using namespace gsc;

namespace {

struct CodecOptions {
  std::string mode = "adaptive";
  int j_uni = 10;
  AdaptiveParams adaptive;
  std::optional<double> q_dc, q_op;
  double q_ac = QuantParams{}.q_ac;
  std::string covariance = "lossless";
  VqConfig vq;

  void add_to(CLI::App* app) {
    app->add_option("--mode", mode, "uniform, adaptive or adaptive-w2")->capture_default_str();
    app->add_option("--j-uni", j_uni, "uniform voxelization depth")->capture_default_str();
    app->add_option("--j-low", adaptive.j_low)->capture_default_str();
    app->add_option("--j-high", adaptive.j_high)->capture_default_str();
    app->add_option("--v-percent", adaptive.v_percent, "share of largest Gaussians kept at j_high")
        ->capture_default_str();
    app->add_option("--tau1", adaptive.tau1, "occupancy split threshold")->capture_default_str();
    app->add_option("--q-ac", q_ac, "SH AC step")->capture_default_str();
    app->add_option("--q-dc", q_dc, "SH DC step (default q_ac / 4)");
    app->add_option("--q-op", q_op, "opacity step (default q_ac / 4)");
    app->add_option("--covariance", covariance, "lossless or vq")->capture_default_str();
    app->add_option("--k-rot", vq.k_rot)->capture_default_str();
    app->add_option("--k-scale", vq.k_scale)->capture_default_str();
    app->add_option("--vq-iterations", vq.iterations)->capture_default_str();
    app->add_option("--seed", vq.seed, "VQ seeding")->capture_default_str();
  }

  EncodeConfig config(double ac) const {
    EncodeConfig c;
    c.mode = parse_voxel_mode(mode);
    c.j_uni = j_uni;
    c.adaptive = adaptive;
    c.quant = {q_dc.value_or(ac / 4), ac, q_op.value_or(ac / 4)};
    c.covariance = parse_covariance_mode(covariance);
    c.vq = vq;
    c.validate();
    return c;
  }
};

Vec3 parse_background(const std::string& s) {
  Vec3 bg{};
  char comma1 = 0, comma2 = 0;
  std::istringstream in(s);
  if (!(in >> bg[0] >> comma1 >> bg[1] >> comma2 >> bg[2]) || comma1 != ',' || comma2 != ',')
    throw InvalidInput("background must be r,g,b");
  return bg;
}

std::vector<Image> load_references(const fs::path& dir, std::size_t count) {
  std::vector<Image> refs;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu", i);
    const fs::path raw = dir / (std::string(name) + ".raw"), ppm = dir / (std::string(name) + ".ppm");
    refs.push_back(fs::exists(raw) ? read_image_raw(raw) : read_ppm(ppm));
  }
  return refs;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// Expands "--config FILE" into ordinary flags. Keys are long option names
// (underscores allowed); a key also given on the command line is skipped so
// explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  const auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::vector<std::string> extra;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line is not 'key = value'", at);
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given || value == "false") continue;
    extra.push_back(flag);
    if (value != "true") extra.push_back(value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

int run(int argc, char** argv) {
  CLI::App app{"Gaussian splat codec: adaptive voxelization, octree geometry and RAHT attributes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // encode
  auto* enc = app.add_subcommand("encode", "compress a model into a container");
  enc->add_option("--config", "key = value file of long option names; flags win");
  std::string enc_in, enc_out;
  CodecOptions enc_opts;
  enc->add_option("input", enc_in, "model file")->required()->check(CLI::ExistingFile);
  enc->add_option("output", enc_out, "container file")->required();
  enc_opts.add_to(enc);
  enc->callback([&] {
    const GaussianCloud cloud = read_model_file(enc_in);
    const EncodeResult r = encode(cloud, enc_opts.config(enc_opts.q_ac));
    write_file_atomic(enc_out, r.bytes);
    std::cout << describe(r.header, r.bytes.size()) << "encode time: " << r.seconds << " s\n";
  });

  // decode
  auto* dec = app.add_subcommand("decode", "reconstruct a model from a container");
  std::string dec_in, dec_out;
  dec->add_option("input", dec_in)->required()->check(CLI::ExistingFile);
  dec->add_option("output", dec_out)->required();
  dec->callback([&] {
    const auto bytes = read_file_bytes(dec_in);
    write_model_file(decode(bytes), dec_out);
  });

  // info
  auto* info = app.add_subcommand("info", "print container header and sections");
  std::string info_in;
  info->add_option("input", info_in)->required()->check(CLI::ExistingFile);
  info->callback([&] {
    const auto bytes = read_file_bytes(info_in);
    std::cout << describe(read_header(bytes), bytes.size());
  });

  // render
  auto* ren = app.add_subcommand("render", "render a model from every camera in a camera file");
  std::string ren_model, ren_cams, ren_dir, ren_bg = "0,0,0";
  bool ren_raw = false;
  ren->add_option("model", ren_model)->required()->check(CLI::ExistingFile);
  ren->add_option("cameras", ren_cams)->required()->check(CLI::ExistingFile);
  ren->add_option("outdir", ren_dir)->required();
  ren->add_option("--background", ren_bg, "r,g,b in [0, 1]")->capture_default_str();
  ren->add_flag("--raw", ren_raw, "also write float images for metrics");
  ren->callback([&] {
    const GaussianCloud cloud = read_model_file(ren_model);
    const auto cams = read_cameras(ren_cams);
    const Vec3 bg = parse_background(ren_bg);
    fs::create_directories(ren_dir);
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const Image img = render(cloud, cams[i], bg);
      char name[32];
      std::snprintf(name, sizeof name, "view_%03zu", i);
      write_ppm(img, fs::path(ren_dir) / (std::string(name) + ".ppm"));
      if (ren_raw) write_image_raw(img, fs::path(ren_dir) / (std::string(name) + ".raw"));
    }
    std::cout << "rendered " << cams.size() << " views into " << ren_dir << "\n";
  });

  // metrics
  auto* met = app.add_subcommand("metrics", "image PSNR or Bjontegaard deltas");
  met->require_subcommand(1);
  auto* met_psnr = met->add_subcommand("psnr", "PSNR between two images (.ppm or raw floats)");
  std::string img_a, img_b;
  met_psnr->add_option("a", img_a)->required()->check(CLI::ExistingFile);
  met_psnr->add_option("b", img_b)->required()->check(CLI::ExistingFile);
  met_psnr->callback([&] { std::cout << psnr(read_image(img_a), read_image(img_b)) << "\n"; });
  auto* met_bd = met->add_subcommand("bd", "BD-rate and BD-PSNR between two labelled curves of a CSV");
  std::string bd_csv, bd_ref, bd_test;
  met_bd->add_option("csv", bd_csv)->required()->check(CLI::ExistingFile);
  met_bd->add_option("--reference", bd_ref)->required();
  met_bd->add_option("--test", bd_test)->required();
  met_bd->callback([&] {
    const auto bytes = read_file_bytes(bd_csv);
    const auto rows = parse_rd_csv(std::string(bytes.begin(), bytes.end()));
    const BdResult r = bd_metrics(curve_for(rows, bd_ref), curve_for(rows, bd_test));
    std::cout << "bd_rate_percent " << r.bd_rate << "\nbd_psnr_db " << r.bd_psnr << "\n";
  });

  // rd-sweep
  auto* sweep = app.add_subcommand("rd-sweep", "rate-distortion sweep over voxel modes and q_ac");
  sweep->add_option("--config", "key = value file of long option names; flags win");
  std::string sw_model, sw_cams, sw_out, sw_refs, sw_bg = "0,0,0";
  std::vector<std::string> sw_modes{"uniform", "adaptive"};
  std::vector<double> sw_q{0.008, 0.016, 0.032, 0.064};
  CodecOptions sw_opts;
  sweep->add_option("model", sw_model)->required()->check(CLI::ExistingFile);
  sweep->add_option("cameras", sw_cams)->required()->check(CLI::ExistingFile);
  sweep->add_option("output", sw_out, "CSV file")->required();
  sweep->add_option("--refs", sw_refs, "directory of view_NNN.raw/.ppm; rendered from the model if absent");
  sweep->add_option("--modes", sw_modes)->delimiter(',')->capture_default_str();
  sweep->add_option("--q-ac-list", sw_q)->delimiter(',')->capture_default_str();
  sweep->add_option("--background", sw_bg)->capture_default_str();
  sw_opts.add_to(sweep);
  sweep->callback([&] {
    const GaussianCloud cloud = read_model_file(sw_model);
    const auto cams = read_cameras(sw_cams);
    const Vec3 bg = parse_background(sw_bg);
    std::vector<Image> refs;
    if (!sw_refs.empty()) {
      refs = load_references(sw_refs, cams.size());
    } else {
      for (const Camera& c : cams) refs.push_back(render(cloud, c, bg));
    }
    std::vector<SweepPoint> grid;
    for (const auto& m : sw_modes)
      for (double q : sw_q) {
        CodecOptions o = sw_opts;
        o.mode = m;
        grid.push_back({m, o.config(q)});
      }
    const auto results = rd_sweep(cloud, cams, refs, grid, bg);
    std::vector<RDRow> rows;
    for (const auto& r : results) {
      rows.push_back({r.label, r.bits, r.psnr});
      std::cout << r.label << " M=" << r.points << " bits=" << r.bits << " psnr=" << r.psnr << "\n";
    }
    const std::string csv = format_rd_csv(rows);
    write_file_atomic(sw_out, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  });

  // synth
  auto* syn = app.add_subcommand("synth", "write the seeded synthetic test scene");
  std::string syn_out;
  SynthParams sp;
  syn->add_option("output", syn_out)->required();
  syn->add_option("--seed", sp.seed)->capture_default_str();
  syn->add_option("--clustered", sp.clustered)->capture_default_str();
  syn->add_option("--dispersed", sp.dispersed)->capture_default_str();
  syn->callback([&] { write_model_file(synthetic_scene(sp), syn_out); });

  // cameras
  auto* cam = app.add_subcommand("cameras", "write the ring camera set used with the synthetic scene");
  std::string cam_out;
  int cam_count = 8, cam_w = 128, cam_h = 128;
  cam->add_option("output", cam_out)->required();
  cam->add_option("--count", cam_count)->capture_default_str()->check(CLI::PositiveNumber);
  cam->add_option("--width", cam_w)->capture_default_str()->check(CLI::PositiveNumber);
  cam->add_option("--height", cam_h)->capture_default_str()->check(CLI::PositiveNumber);
  cam->callback([&] { write_cameras(synthetic_cameras(cam_count, cam_w, cam_h), cam_out); });

  std::vector<std::string> args = expand_config(std::vector<std::string>(argv, argv + argc));
  std::reverse(args.begin(), args.end());
  args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gsc::Error& e) {
    std::cerr << "gsc: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gsc: " << e.what() << "\n";
    return 2;
  }
}

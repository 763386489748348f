#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ribsim/scene.hpp"

namespace fs = std::filesystem;
using namespace ribsim;

namespace {

SceneConfig resolve_scene(const std::string& arg) {
    if (fs::exists(arg)) return load_scene(arg);
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), arg) != names.end()) return make_preset(arg);
    throw std::invalid_argument("no such scene file or preset: " + arg);
}

std::vector<int> parse_sizes(const std::string& csv) {
    std::vector<int> sizes;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
    return sizes;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"developable ribbon dynamics"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "simulate a scene file or preset");
    std::string scene_arg, out_override, kinetic_override, grad_override;
    int frames_override = -1, threads_override = -1;
    double h_override = -1;
    bool quiet = false;
    run->add_option("scene", scene_arg, "scene file or preset name")->required();
    run->add_option("--out", out_override, "output directory");
    run->add_option("--frames", frames_override, "number of frames");
    run->add_option("--h", h_override, "timestep in seconds");
    run->add_option("--threads", threads_override, "worker threads for substep 1");
    run->add_option("--kinetic", kinetic_override, "full|lumped");
    run->add_option("--grad", grad_override, "adjoint|chain");
    run->add_flag("--quiet", quiet, "suppress per-frame log");

    auto* bench = app.add_subcommand("bench-grad", "time both gradient paths");
    std::string sizes_csv = "50,100,200,400";
    std::string bench_out;
    bench->add_option("--sizes", sizes_csv, "comma-separated segment counts");
    bench->add_option("--out", bench_out, "CSV output file (default stdout)");

    auto* presets = app.add_subcommand("presets", "built-in scenes");
    bool list = false;
    std::string dump_name, dump_file;
    presets->add_flag("--list", list, "list preset names");
    presets->add_option("--dump", dump_name, "write a preset as a scene file");
    presets->add_option("--out", dump_file, "target file for --dump");

    auto* validate = app.add_subcommand("validate", "parse and validate a scene file");
    std::string validate_arg;
    validate->add_option("scene", validate_arg, "scene file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            SceneConfig cfg = resolve_scene(scene_arg);
            if (frames_override >= 0) cfg.frames = frames_override;
            if (h_override > 0) cfg.h = h_override;
            if (threads_override > 0) cfg.threads = threads_override;
            if (!kinetic_override.empty()) {
                if (kinetic_override != "full" && kinetic_override != "lumped")
                    throw std::invalid_argument("--kinetic must be full|lumped");
                cfg.kinetic = kinetic_override == "full" ? KineticMode::Full : KineticMode::Lumped;
            }
            if (!grad_override.empty()) {
                if (grad_override != "adjoint" && grad_override != "chain")
                    throw std::invalid_argument("--grad must be adjoint|chain");
                cfg.solver.use_adjoint = grad_override == "adjoint";
            }
            const fs::path out = out_override.empty() ? fs::path(cfg.out_dir) : fs::path(out_override);
            const RunResult res = run_scene(cfg, out, quiet);
            std::cout << "wrote " << res.frames << " frames to " << out.string()
                      << (res.any_warning ? " (solver warnings logged)" : "") << "\n";
            return 0;
        }
        if (*bench) {
            const auto rows = bench_gradient(parse_sizes(sizes_csv));
            const std::string csv = bench_csv(rows);
            if (bench_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(bench_out);
                out << csv;
            }
            return 0;
        }
        if (*presets) {
            if (list) {
                for (const auto& name : preset_names()) std::cout << name << "\n";
            }
            if (!dump_name.empty()) {
                const SceneConfig cfg = make_preset(dump_name);
                if (dump_file.empty()) {
                    std::cout << serialize_scene(cfg);
                } else {
                    save_scene(cfg, dump_file);
                }
            }
            return 0;
        }
        if (*validate) {
            load_scene(validate_arg);
            std::cout << "ok\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// vflossy: variable-to-fixed length lossy compression toolkit.
//
// Subcommands: rd, build, verify, encode, decode, analyze, report.
// Exit codes: 0 success, 1 config error, 2 numerical failure,
// 3 integrity/audit failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "vflossy/analysis.hpp"
#include "vflossy/codec.hpp"
#include "vflossy/common.hpp"
#include "vflossy/covering.hpp"
#include "vflossy/dball.hpp"
#include "vflossy/dictionary.hpp"
#include "vflossy/experiment.hpp"
#include "vflossy/rd.hpp"

namespace vf = vflossy;
using nlohmann::json;

namespace {

std::vector<double> parse_csv_doubles(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        try {
            out.push_back(std::stod(s.substr(pos, next - pos)));
        } catch (...) {
            throw vf::ConfigError("cannot parse number in list: '" + s + "'");
        }
        pos = next + 1;
    }
    if (out.empty()) throw vf::ConfigError("empty numeric list");
    return out;
}

vf::DistortionSpec make_spec(const std::string& name, std::size_t alphabet, double level) {
    if (name == "hamming") return vf::DistortionSpec::hamming(alphabet, level);
    std::ifstream f(name);
    if (!f) throw vf::ConfigError("distortion: no builtin named '" + name + "' and no such file");
    json j;
    f >> j;
    if (!j.is_object() || !j.contains("matrix"))
        throw vf::ConfigError("distortion file: expected {\"matrix\": [[...], ...]}");
    auto rows = j.at("matrix");
    std::size_t nx = rows.size();
    if (nx == 0) throw vf::ConfigError("distortion file: empty matrix");
    std::size_t ny = rows[0].size();
    std::vector<double> m;
    for (auto& r : rows) {
        if (r.size() != ny) throw vf::ConfigError("distortion file: ragged matrix");
        for (auto& v : r) m.push_back(v.get<double>());
    }
    return vf::DistortionSpec(nx, ny, std::move(m), level);
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& what) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw vf::ConfigError(what + ": unknown config field '" + it.key() + "'");
}

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("VFLOSSY_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        return std::stoull(v);
    } catch (...) {
        throw vf::ConfigError("VFLOSSY_SEED is not an integer");
    }
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw vf::IoError("cannot open: " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw vf::IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw vf::IoError("write failed: " + path);
}

int cmd_rd(const std::string& source_str, const std::string& distortion, double level, double step,
           double tol) {
    vf::Pmf source(parse_csv_doubles(source_str));
    vf::DistortionSpec spec = make_spec(distortion, source.size(), level);
    vf::RDOptions opt;
    opt.tol = tol;
    vf::RDResult r = vf::rate_distortion(source, spec, opt);
    std::printf("rate_bits_per_symbol %.12g\n", r.rate);
    std::printf("slope_bits_per_distortion %.12g\n", r.slope);
    std::printf("output_dist");
    for (std::size_t y = 0; y < r.output_dist.size(); ++y)
        std::printf(" %.12g", r.output_dist[y]);
    std::printf("\niterations %d\nconverged %d\n", r.iterations, r.converged ? 1 : 0);
    if (!r.converged) return 2;
    try {
        vf::RDSensitivity s = vf::rd_sensitivity(source, spec, step);
        std::printf("gradient");
        for (double g : s.gradient) std::printf(" %.12g", g);
        std::printf("\ndispersion_bits2 %.12g\nhessian_fnorm %.12g\n", s.dispersion,
                    s.hessian_fnorm);
    } catch (const vf::ConfigError& e) {
        std::printf("sensitivity skipped: %s\n", e.what());
    }
    return 0;
}

struct BuildCli {
    std::string distortion = "hamming";
    std::size_t alphabet = 2;
    double level = 0.1;
    std::uint64_t budget = 4096;
    double upsilon = 4.0;
    double r_min = 0.06;
    std::uint64_t seed = 1;
    std::string out = "dictionary.vfld";
};

int cmd_build(const BuildCli& b) {
    vf::DistortionSpec spec = make_spec(b.distortion, b.alphabet, b.level);
    vf::RateCache cache(spec);
    vf::BuildOptions opt;
    opt.upsilon = b.upsilon;
    opt.seed = b.seed;
    opt.r_min = b.r_min;
    vf::detail::CoverSizeCache covers;
    vf::GammaSearch gs = vf::choose_gamma(b.budget, cache, opt, 1.0, &covers);
    vf::Dictionary d = vf::build_dictionary(gs.gamma, cache, b.budget, opt, &covers);
    vf::save_dictionary(d, b.out);
    std::printf("gamma_bits %.6f\n", d.gamma);
    std::printf("gamma_closed_form_bits %.6f\n", gs.closed_form);
    std::printf("M_actual %llu\n", static_cast<unsigned long long>(d.size()));
    std::printf("index_width_bits %u\n", d.index_width);
    std::printf("max_blocklength %u\n", d.max_blocklength());
    std::printf("scan_cap %u\n", d.scan_cap);
    std::printf("truncated_at_cap %d\n", d.truncated_at_cap ? 1 : 0);
    std::printf("dictionary_crc32 %08x\n", vf::dictionary_crc(d));
    std::printf("wrote %s\n", b.out.c_str());
    return 0;
}

int cmd_verify(const std::string& dict_path, std::uint64_t samples, std::uint64_t exhaustive_cap) {
    vf::Dictionary d = vf::load_dictionary(dict_path);
    vf::RateCache cache(d.spec);
    bool ok = true;

    // Every stored type must be transitional at the stored threshold.
    std::vector<std::pair<vf::TypeClass, std::pair<std::uint64_t, std::uint64_t>>> groups;
    std::uint64_t i = 0;
    while (i < d.entries.size()) {
        std::uint64_t j = i;
        while (j < d.entries.size() && d.entries[j].type == d.entries[i].type) ++j;
        groups.push_back({d.entries[i].type, {i, j}});
        i = j;
    }
    std::size_t bad_types = 0, bad_coverings = 0;
    std::uint64_t checked_members = 0;
    for (auto& [type, range] : groups) {
        if (!vf::is_transitional(type, d.gamma, cache)) {
            ++bad_types;
            ok = false;
        }
        vf::Covering c;
        c.type = type;
        for (std::uint64_t k = range.first; k < range.second; ++k)
            c.codewords.push_back(d.entries[k].codeword);
        auto rep = vf::verify_covering(c, d.spec, exhaustive_cap, samples,
                                       vf::CounterRng::mix(d.seed, range.first));
        checked_members += rep.checked;
        if (rep.misses > 0) {
            ++bad_coverings;
            ok = false;
            std::printf("covering MISS: n=%u first_index=%llu misses=%llu\n",
                        static_cast<unsigned>(type.n()),
                        static_cast<unsigned long long>(range.first),
                        static_cast<unsigned long long>(rep.misses));
        }
    }
    std::printf("types %zu, non_transitional %zu, covering_violations %zu, members_checked %llu\n",
                groups.size(), bad_types, bad_coverings,
                static_cast<unsigned long long>(checked_members));
    std::printf("verify %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 3;
}

int cmd_encode(const std::string& dict_path, const std::string& in_path,
               const std::string& out_path, std::uint64_t count) {
    vf::Dictionary d = vf::load_dictionary(dict_path);
    auto symbols = read_bytes(in_path);
    std::size_t pos = 0;
    auto src = [&]() -> std::optional<std::uint8_t> {
        if (pos >= symbols.size()) return std::nullopt;
        return symbols[pos++];
    };
    if (count == 0) {
        // Greedy default: as many whole segments as the input supports.
        std::vector<vf::ParseResult> segs;
        vf::BitWriter w;
        for (;;) {
            std::size_t mark = pos;
            try {
                vf::ParseResult r = vf::parse_first(d, src);
                segs.push_back(r);
                w.put(r.codeword_index, d.index_width);
            } catch (const vf::IoError&) {
                pos = mark;
                break;
            }
        }
        w.flush();
        vf::save_encoded(out_path, vf::dictionary_crc(d), d.index_width, segs.size(), w.bytes);
        std::printf("segments %zu\nconsumed_symbols %zu\nwrote %s\n", segs.size(), pos,
                    out_path.c_str());
        return 0;
    }
    vf::EncodeResult enc = vf::encode_stream(d, src, count);
    vf::save_encoded(out_path, vf::dictionary_crc(d), d.index_width, count, enc.bits);
    double worst = 0.0;
    for (auto& s : enc.segments) worst = std::max(worst, s.distortion);
    std::printf("segments %llu\nconsumed_symbols %u\nmax_segment_distortion %.12g\nwrote %s\n",
                static_cast<unsigned long long>(count),
                enc.boundaries.empty() ? 0u : enc.boundaries.back(), worst, out_path.c_str());
    return 0;
}

int cmd_decode(const std::string& dict_path, const std::string& in_path,
               const std::string& out_path) {
    vf::Dictionary d = vf::load_dictionary(dict_path);
    vf::EncodedFile enc = vf::load_encoded(in_path);
    if (enc.dict_crc != vf::dictionary_crc(d))
        throw vf::IntegrityError("decode: encoded stream was produced with a different dictionary "
                                 "(CRC mismatch)");
    if (enc.index_width != d.index_width)
        throw vf::IntegrityError("decode: index width mismatch");
    auto words = vf::decode(d, enc.bits, enc.count);
    std::vector<std::uint8_t> out;
    for (auto& w : words) out.insert(out.end(), w.begin(), w.end());
    write_bytes(out_path, out);
    std::printf("segments %llu\nsymbols %zu\nwrote %s\n",
                static_cast<unsigned long long>(enc.count), out.size(), out_path.c_str());
    return 0;
}

int cmd_analyze(const vf::GridConfig& cfg, const std::string& out_dir, bool check_bound) {
    std::filesystem::create_directories(out_dir);
    vf::GridOutcome out = vf::run_grid(cfg);
    vf::write_grid_csv(out, out_dir + "/results.csv");
    {
        std::ofstream f(out_dir + "/manifest.json", std::ios::trunc);
        if (!f) throw vf::IoError("cannot open manifest for writing");
        f << vf::grid_manifest(cfg, out).dump(2) << "\n";
    }
    std::printf("rows %zu\n", out.rows.size());
    std::printf("sandwich fitted_c %.6g worst_dev %.3f holds %d stable %d\n", out.fitted_c,
                out.worst_c_deviation, out.sandwich_holds ? 1 : 0, out.sandwich_stable ? 1 : 0);
    for (auto& r : out.regressions)
        std::printf("second_order p=%.3g D=%.3g intercept %.4f target %.4f within20 %d\n", r.p, r.d,
                    r.intercept, r.target, r.within_20pct ? 1 : 0);
    std::printf("wrote %s/results.csv and %s/manifest.json\n", out_dir.c_str(), out_dir.c_str());
    if (check_bound && !(out.sandwich_holds && out.sandwich_stable)) return 3;
    return 0;
}

int cmd_report(const std::string& csv_path, const std::string& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw vf::IoError("cannot open: " + manifest_path);
    json m;
    mf >> m;
    std::printf("== run summary ==\n");
    std::printf("trials/point: %llu, seed: %llu\n",
                m["config"]["trials"].get<unsigned long long>(),
                m["config"]["seed"].get<unsigned long long>());
    auto sw = m["sandwich"];
    std::printf("sandwich: fitted_c=%.5g worst_dev=%.3f holds=%d stable=%d\n",
                sw["fitted_c"].get<double>(), sw["worst_relative_deviation"].get<double>(),
                sw["holds"].get<bool>() ? 1 : 0, sw["stable_50pct"].get<bool>() ? 1 : 0);
    for (auto& r : m["second_order"])
        std::printf("second-order p=%.3g D=%.3g: intercept %.4f vs target %.4f -> %s\n",
                    r["p"].get<double>(), r["D"].get<double>(), r["intercept"].get<double>(),
                    r["target"].get<double>(), r["within_20pct"].get<bool>() ? "ok" : "OFF");
    for (auto& d : m["dictionaries"]) {
        bool exceeded = d["transitional_count_reference_exceeded"].get<bool>();
        std::printf("dict D=%.3g M=%llu: gamma=%.3f M_actual=%llu max_n=%u%s%s\n",
                    d["D"].get<double>(), d["M"].get<unsigned long long>(),
                    d["gamma"].get<double>(), d["M_actual"].get<unsigned long long>(),
                    d["max_blocklength"].get<unsigned>(),
                    d["truncated_at_cap"].get<bool>() ? " [truncated-at-cap]" : "",
                    exceeded ? " [FLAG: |A_n| exceeds n^(|X|-2) reference]" : "");
    }
    auto beta = m["extension_rate_decay"];
    std::printf("extension-rate decay beta=%.3f ci=[%.3f, %.3f]%s\n", beta["beta"].get<double>(),
                beta["beta_ci"][0].get<double>(), beta["beta_ci"][1].get<double>(),
                beta["matches_inverse_square"].get<bool>()
                    ? ""
                    : " [FLAG: inconsistent with 1/n^2 extension-rate decay]");
    // The CSV is echoed through so scripted consumers can pipe the report.
    std::ifstream cf(csv_path);
    if (!cf) throw vf::IoError("cannot open: " + csv_path);
    std::printf("== results.csv ==\n");
    std::string line;
    while (std::getline(cf, line)) std::printf("%s\n", line.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"variable-to-fixed length lossy compression toolkit"};
    app.require_subcommand(1);

    // rd
    auto* rd = app.add_subcommand("rd", "rate-distortion quantities for a source");
    std::string rd_source = "0.5,0.5", rd_dist = "hamming";
    double rd_level = 0.1, rd_step = 1e-5, rd_tol = 1e-9;
    rd->add_option("--source", rd_source, "comma-separated pmf");
    rd->add_option("--distortion", rd_dist, "builtin name or matrix JSON path");
    rd->add_option("--D", rd_level, "distortion level");
    rd->add_option("--step", rd_step, "finite-difference step");
    rd->add_option("--tol", rd_tol, "solver tolerance");

    // build
    auto* build = app.add_subcommand("build", "construct and save a parsing dictionary");
    BuildCli bc;
    std::string build_config;
    build->add_option("--config", build_config, "JSON config file");
    auto* b_dist = build->add_option("--distortion", bc.distortion);
    auto* b_alpha = build->add_option("--alphabet", bc.alphabet);
    auto* b_level = build->add_option("--D", bc.level);
    auto* b_m = build->add_option("--M", bc.budget);
    auto* b_ups = build->add_option("--upsilon", bc.upsilon);
    auto* b_rmin = build->add_option("--r-min", bc.r_min);
    auto* b_seed = build->add_option("--seed", bc.seed);
    auto* b_out = build->add_option("--out", bc.out);

    // verify
    auto* verify = app.add_subcommand("verify", "audit a saved dictionary");
    std::string v_dict;
    std::uint64_t v_samples = 20000, v_cap = std::uint64_t{1} << 20;
    verify->add_option("--dict", v_dict)->required();
    verify->add_option("--samples", v_samples, "samples per large covering");
    verify->add_option("--exhaustive-cap", v_cap, "max class size for exhaustive checks");

    // encode / decode
    auto* encode = app.add_subcommand("encode", "parse a symbol stream into indices");
    std::string e_dict, e_in, e_out = "encoded.vfls";
    std::uint64_t e_count = 0;
    encode->add_option("--dict", e_dict)->required();
    encode->add_option("--in", e_in)->required();
    encode->add_option("--out", e_out);
    encode->add_option("--count", e_count, "segments to emit (0 = as many as fit)");

    auto* decode = app.add_subcommand("decode", "expand indices back to reproduction symbols");
    std::string d_dict, d_in, d_out = "decoded.bin";
    decode->add_option("--dict", d_dict)->required();
    decode->add_option("--in", d_in)->required();
    decode->add_option("--out", d_out);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Monte-Carlo rate experiments over a grid");
    std::string a_config, a_out = "analysis_out";
    bool a_check = false;
    vf::GridConfig gc;
    std::string a_p, a_d, a_m, a_eps;
    analyze->add_option("--config", a_config, "JSON config file");
    analyze->add_option("--out", a_out, "output directory");
    auto* a_pl = analyze->add_option("--p-list", a_p, "comma-separated binary source parameters");
    auto* a_dl = analyze->add_option("--D-list", a_d);
    auto* a_ml = analyze->add_option("--M-list", a_m);
    auto* a_el = analyze->add_option("--eps-list", a_eps);
    auto* a_tr = analyze->add_option("--trials", gc.trials);
    auto* a_seed = analyze->add_option("--seed", gc.seed);
    auto* a_jobs = analyze->add_option("--jobs", gc.jobs, "worker threads (0 = hardware)");
    auto* a_ups = analyze->add_option("--upsilon", gc.build.upsilon);
    analyze->add_flag("--check-bound", a_check, "exit 3 unless the rate sandwich holds");

    // report
    auto* report = app.add_subcommand("report", "summarize an analyze run");
    std::string r_csv = "analysis_out/results.csv", r_manifest = "analysis_out/manifest.json";
    report->add_option("--csv", r_csv);
    report->add_option("--manifest", r_manifest);

    try {
        app.parse(argc, argv);

        if (rd->parsed()) return cmd_rd(rd_source, rd_dist, rd_level, rd_step, rd_tol);

        if (build->parsed()) {
            if (!build_config.empty()) {
                std::ifstream f(build_config);
                if (!f) throw vf::ConfigError("cannot open config: " + build_config);
                json j;
                f >> j;
                reject_unknown_keys(j, {"distortion", "alphabet", "D", "M", "upsilon", "r_min",
                                        "seed", "out"},
                                    "build");
                if (j.contains("distortion") && !*b_dist) bc.distortion = j["distortion"];
                if (j.contains("alphabet") && !*b_alpha) bc.alphabet = j["alphabet"];
                if (j.contains("D") && !*b_level) bc.level = j["D"];
                if (j.contains("M") && !*b_m) bc.budget = j["M"];
                if (j.contains("upsilon") && !*b_ups) bc.upsilon = j["upsilon"];
                if (j.contains("r_min") && !*b_rmin) bc.r_min = j["r_min"];
                if (j.contains("seed") && !*b_seed) bc.seed = j["seed"];
                if (j.contains("out") && !*b_out) bc.out = j["out"];
            }
            if (auto s = env_seed(); s && !*b_seed) bc.seed = *s;
            return cmd_build(bc);
        }

        if (verify->parsed()) return cmd_verify(v_dict, v_samples, v_cap);
        if (encode->parsed()) return cmd_encode(e_dict, e_in, e_out, e_count);
        if (decode->parsed()) return cmd_decode(d_dict, d_in, d_out);

        if (analyze->parsed()) {
            if (!a_config.empty()) {
                std::ifstream f(a_config);
                if (!f) throw vf::ConfigError("cannot open config: " + a_config);
                json j;
                f >> j;
                reject_unknown_keys(
                    j,
                    {"p_list", "D_list", "M_list", "eps_list", "trials", "seed", "jobs", "upsilon",
                     "r_min", "regression_eps", "bound_slack", "hessian_grid", "hessian_margin",
                     "delta_scan", "delta_samples"},
                    "analyze");
                if (j.contains("p_list")) gc.p_list = j["p_list"].get<std::vector<double>>();
                if (j.contains("D_list")) gc.d_list = j["D_list"].get<std::vector<double>>();
                if (j.contains("M_list")) gc.m_list = j["M_list"].get<std::vector<std::uint64_t>>();
                if (j.contains("eps_list")) gc.eps_list = j["eps_list"].get<std::vector<double>>();
                if (j.contains("trials") && !*a_tr) gc.trials = j["trials"];
                if (j.contains("seed") && !*a_seed) gc.seed = j["seed"];
                if (j.contains("jobs") && !*a_jobs) gc.jobs = j["jobs"];
                if (j.contains("upsilon") && !*a_ups) gc.build.upsilon = j["upsilon"];
                if (j.contains("r_min")) gc.build.r_min = j["r_min"];
                if (j.contains("regression_eps")) gc.regression_eps = j["regression_eps"];
                if (j.contains("bound_slack")) gc.bound_slack = j["bound_slack"];
                if (j.contains("hessian_grid")) gc.hessian_grid = j["hessian_grid"];
                if (j.contains("hessian_margin")) gc.hessian_margin = j["hessian_margin"];
                if (j.contains("delta_scan")) gc.delta_scan = j["delta_scan"];
                if (j.contains("delta_samples")) gc.delta_samples = j["delta_samples"];
            }
            if (*a_pl) gc.p_list = parse_csv_doubles(a_p);
            if (*a_dl) gc.d_list = parse_csv_doubles(a_d);
            if (*a_ml) {
                gc.m_list.clear();
                for (double v : parse_csv_doubles(a_m))
                    gc.m_list.push_back(static_cast<std::uint64_t>(v));
            }
            if (*a_el) gc.eps_list = parse_csv_doubles(a_eps);
            if (auto s = env_seed(); s && !*a_seed) gc.seed = *s;
            return cmd_analyze(gc, a_out, a_check);
        }

        if (report->parsed()) return cmd_report(r_csv, r_manifest);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const vf::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const vf::SolverError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const vf::IntegrityError& e) {
        std::fprintf(stderr, "integrity failure: %s\n", e.what());
        return 3;
    } catch (const vf::IoError& e) {
        std::fprintf(stderr, "io failure: %s\n", e.what());
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }
    return 0;
}

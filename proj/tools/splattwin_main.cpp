#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "splat/damage/damage.hpp"
#include "splat/hierarchy/hierarchy.hpp"
#include "splat/io/colmap.hpp"
#include "splat/io/image_io.hpp"
#include "splat/io/ply.hpp"
#include "splat/synth/synth.hpp"
#include "splat/train/optimizer.hpp"
#include "splat/twin/twin_update.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace splat;

namespace {

// ---------------------------------------------------------------- plumbing

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ULL) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "' for hashing");
    uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

uint64_t hash_string(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex64(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Inputs hashed before an expensive stage; identical reruns are skipped.
struct RunManifest {
    std::map<std::string, std::string> input_hashes;
    std::string config_hash;
    std::vector<std::string> outputs;

    void add_file(const std::string& path) { input_hashes[path] = hex64(hash_file(path)); }
    void add_dir(const std::string& dir) {
        std::vector<std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file()) files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        for (const std::string& f : files) add_file(f);
    }
    void set_config(const std::string& text) { config_hash = hex64(hash_string(text)); }

    std::string path_for(const std::string& out) const { return out + ".manifest.json"; }

    bool up_to_date(const std::string& out) const {
        std::ifstream in(path_for(out));
        if (!in) return false;
        json j;
        try {
            j = json::parse(in);
        } catch (...) {
            return false;
        }
        if (j.value("config_hash", "") != config_hash) return false;
        auto it = j.find("input_hashes");
        if (it == j.end() || it->size() != input_hashes.size()) return false;
        for (const auto& [path, hash] : input_hashes) {
            if (!it->contains(path) || (*it)[path] != hash) return false;
        }
        for (const auto& o : j.value("outputs", std::vector<std::string>{}))
            if (!fs::exists(o)) return false;
        return true;
    }

    void write(const std::string& out) const {
        json j;
        j["input_hashes"] = input_hashes;
        j["config_hash"] = config_hash;
        j["outputs"] = outputs;
        std::ofstream f(path_for(out));
        f << j.dump(2) << '\n';
    }
};

// write-to-temp, promote on success
class AtomicFile {
  public:
    explicit AtomicFile(std::string final_path) : final_(std::move(final_path)) {
        fs::path p(final_);
        tmp_ = (p.parent_path() / (".tmp." + p.filename().string())).string();
    }
    const std::string& tmp() const { return tmp_; }
    void promote() {
        fs::rename(tmp_, final_);
        promoted_ = true;
    }
    ~AtomicFile() {
        if (!promoted_) {
            std::error_code ec;
            fs::remove(tmp_, ec);
        }
    }

  private:
    std::string final_, tmp_;
    bool promoted_ = false;
};

void write_text(const std::string& path, const std::string& text) {
    if (!path.empty() && fs::path(path).has_parent_path())
        fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Dataset {
    SparseModel model;
    std::vector<Camera> cameras;                  // one per model image, id = image name
    std::map<std::string, std::string> img_path;  // image name -> file path
};

Dataset load_dataset(const std::string& model_dir, const std::string& images_dir) {
    Dataset ds;
    ds.model = parse_colmap_text(model_dir);
    ds.cameras = cameras_from_colmap(ds.model);
    for (const ColmapImage& im : ds.model.images) {
        fs::path p = fs::path(images_dir) / im.name;
        if (!fs::exists(p)) throw InputError("image '" + p.string() + "' listed in the model is missing");
        ds.img_path[im.name] = p.string();
    }
    return ds;
}

TrainConfig load_train_config(const std::string& config_path, uint64_t seed, int threads,
                              int iterations) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = TrainConfig::from_json(read_text(config_path));
    if (seed != static_cast<uint64_t>(-1)) cfg.seed = seed;
    if (threads > 0) cfg.threads = threads;
    if (iterations >= 0) cfg.iterations = iterations;
    return cfg;
}

MaskBuffer load_view_mask(const std::string& masks_dir, const std::string& name,
                          const DamageClassSet& classes, int w, int h) {
    fs::path p = fs::path(masks_dir) / name;
    if (!fs::exists(p)) return MaskBuffer(w, h);  // absent mask = no damage in view
    MaskBuffer m = load_mask(p.string(), classes);
    if (m.width != w || m.height != h)
        throw InputError("mask '" + p.string() + "' does not match its image size");
    return m;
}

void save_progression_png(const MaskBuffer& prog, size_t n_classes, const Vec3& pre_color,
                          const Vec3& new_color, const std::string& path) {
    ImageBuffer img(prog.width, prog.height);
    for (size_t i = 0; i < prog.labels.size(); ++i) {
        uint8_t l = prog.labels[i];
        if (l == 0) continue;
        img.pixels[i] = progression_is_new(l, n_classes) ? new_color : pre_color;
    }
    save_image(img, path);
}

// --------------------------------------------------------------- commands

struct Common {
    uint64_t seed = static_cast<uint64_t>(-1);  // -1 = keep config default
    int threads = 0;
    bool force = false;
};

int cmd_synth(const std::string& spec_path, const std::string& out_dir, bool with_progression,
              const Common& c) {
    SynthSpec spec = spec_path.empty() ? SynthSpec::with_default_damage()
                                       : SynthSpec::from_json(read_text(spec_path));
    if (c.seed != static_cast<uint64_t>(-1)) spec.seed = c.seed;
    SynthScene scene = generate_scene(spec);
    if (with_progression) {
        double w = spec.facade_width, h = spec.facade_height;
        std::string cls = DamageClassSet(spec.classes).label_of("crack") > 0
                              ? "crack"
                              : spec.classes.front().name;
        std::vector<DamagePolygon> extra = {polyline_polygon(
            cls, {Vec2(0.15 * w, 0.60 * h), Vec2(0.25 * w, 0.72 * h), Vec2(0.22 * w, 0.85 * h)},
            0.03 * std::min(w, h))};
        add_progression(scene, extra, 8);
    }
    emit_dataset(scene, out_dir);
    write_text((fs::path(out_dir) / "spec.json").string(), scene.spec.to_json());
    std::cout << "synth: " << scene.cameras.size() << " views"
              << (scene.new_cameras.empty()
                      ? std::string()
                      : " + " + std::to_string(scene.new_cameras.size()) + " new-survey views")
              << " -> " << out_dir << '\n';
    return 0;
}

int cmd_train(const std::string& model_dir, const std::string& images_dir,
              const std::string& masks_dir, const std::string& classes_path,
              const std::string& config_path, const std::string& out_ply, int iterations,
              const Common& c) {
    if (!masks_dir.empty() && classes_path.empty())
        throw ConfigError("train: --masks requires --classes");
    TrainConfig cfg = load_train_config(config_path, c.seed, c.threads, iterations);

    RunManifest man;
    man.add_dir(model_dir);
    man.add_dir(images_dir);
    if (!masks_dir.empty()) man.add_dir(masks_dir);
    if (!classes_path.empty()) man.add_file(classes_path);
    man.set_config(cfg.to_json());
    man.outputs = {out_ply};
    if (!c.force && man.up_to_date(out_ply)) {
        std::cout << "train: up to date, skipped (use --force to rerun)\n";
        return 0;
    }

    Dataset ds = load_dataset(model_dir, images_dir);
    DamageClassSet classes;
    if (!classes_path.empty()) classes = DamageClassSet::load(classes_path);

    std::vector<TrainView> views;
    for (const Camera& cam : ds.cameras) {
        TrainView v;
        v.camera = cam;
        v.target = load_image(ds.img_path.at(cam.id));
        if (v.target.width != cam.width || v.target.height != cam.height)
            throw InputError("image '" + cam.id + "' does not match its camera dimensions");
        if (!masks_dir.empty()) {
            MaskBuffer m = load_view_mask(masks_dir, cam.id, classes, cam.width, cam.height);
            v.target = composite_mask(v.target, m, classes);
        }
        views.push_back(std::move(v));
    }

    GaussianCloud cloud = init_from_points(ds.model.points, ds.cameras, cfg.sh_degree);
    TrainReport report = train(cloud, views, cfg);

    AtomicFile out(out_ply);
    write_ply(cloud, out.tmp());
    out.promote();
    write_text(out_ply + ".report.json", report.to_json());
    man.write(out_ply);
    std::cout << "train: " << cloud.count << " primitives, psnr " << report.final_psnr << " -> "
              << out_ply << '\n';
    return 0;
}

Camera camera_from_pose_json(const std::string& path) {
    json j = json::parse(read_text(path));
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    auto R = j.at("rotation");
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            cam.world_to_camera_rotation(r, k) = R.at(r * 3 + k).get<double>();
    auto t = j.at("translation");
    cam.world_to_camera_translation =
        Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    cam.id = j.value("id", std::string("pose"));
    cam.validate();
    return cam;
}

int cmd_render(const std::string& ply_path, const std::string& model_dir,
               const std::string& view_name, const std::string& pose_path,
               const std::string& out_img, const std::string& classes_path, bool extract_masks,
               const Common& c) {
    Camera cam;
    if (!pose_path.empty()) {
        cam = camera_from_pose_json(pose_path);
    } else if (!model_dir.empty() && !view_name.empty()) {
        SparseModel model = parse_colmap_text(model_dir);
        bool found = false;
        for (const ColmapImage& im : model.images)
            if (im.name == view_name) {
                cam = camera_from_colmap(model, im);
                found = true;
            }
        if (!found) throw InputError("render: view '" + view_name + "' not in the model");
    } else {
        throw ConfigError("render: give either --camera pose.json or --model with --view");
    }

    GaussianCloud cloud = read_ply(ply_path);
    RenderOptions opt;
    if (c.threads > 0) opt.threads = c.threads;
    RenderOutput ro = render(cloud, cam, opt);

    AtomicFile out(out_img);
    save_image(ro.image, out.tmp());
    out.promote();

    if (extract_masks) {
        if (classes_path.empty()) throw ConfigError("render: --extract-masks requires --classes");
        DamageClassSet classes = DamageClassSet::load(classes_path);
        MaskBuffer m = extract_mask(ro.image, classes);
        fs::path mp = fs::path(out_img).parent_path() /
                      (fs::path(out_img).stem().string() + "_mask.png");
        save_mask(m, classes, mp.string());
    }
    std::cout << "render: " << cam.id << " -> " << out_img << '\n';
    return 0;
}

int cmd_select(const std::string& ply_path, const std::string& model_dir,
               const std::string& masks_dir, const std::string& classes_path,
               const std::string& out_json, const std::string& mask_out_dir, int v_min,
               int k_min, int dilation, const Common& c) {
    (void)c;
    GaussianCloud cloud = read_ply(ply_path);
    DamageClassSet classes = DamageClassSet::load(classes_path);
    SparseModel model = parse_colmap_text(model_dir);
    std::vector<Camera> cameras = cameras_from_colmap(model);

    std::vector<MaskBuffer> masks;
    for (const Camera& cam : cameras)
        masks.push_back(load_view_mask(masks_dir, cam.id, classes, cam.width, cam.height));

    SelectConfig scfg;
    scfg.v_min = v_min;
    Selection sel;
    sel.damage_indices =
        select_damage_gaussians(cloud, classes, masks, cameras, scfg, &sel.damage_class_of);
    if (sel.damage_indices.empty())
        throw ConsistencyError("select: no damage primitives matched the masks");

    double extent = scene_extent(cameras);
    sel.neighbor_indices =
        expand_neighbors(cloud, sel.damage_indices, static_cast<size_t>(k_min),
                         neighbor_r0(cloud, sel.damage_indices), extent);
    std::vector<size_t> all = sel.all_indices();
    for (const Camera& cam : cameras) sel.hull_masks[cam.id] = hull_mask(cloud, all, cam, dilation);

    std::string mask_dir = mask_out_dir.empty()
                               ? (fs::path(out_json).parent_path() / "hull_masks").string()
                               : mask_out_dir;
    save_selection(sel, out_json, mask_dir);
    std::cout << "select: " << sel.damage_indices.size() << " damage + "
              << sel.neighbor_indices.size() << " neighbor primitives -> " << out_json << '\n';
    return 0;
}

int cmd_refine(const std::string& ply_path, const std::string& selection_path,
               const std::string& model_dir, const std::string& images_dir,
               const std::string& masks_dir, const std::string& classes_path,
               const std::string& mode_str, const std::string& config_path,
               const std::string& out_ply, int iterations, const Common& c) {
    RefineMode mode;
    if (mode_str == "finetune")
        mode = RefineMode::finetune;
    else if (mode_str == "retrain")
        mode = RefineMode::retrain;
    else
        throw ConfigError("refine: --mode must be finetune or retrain");
    TrainConfig cfg = load_train_config(config_path, c.seed, c.threads, iterations);

    RunManifest man;
    man.add_file(ply_path);
    man.add_file(selection_path);
    man.add_dir(model_dir);
    man.add_dir(images_dir);
    if (!masks_dir.empty()) man.add_dir(masks_dir);
    man.set_config(cfg.to_json() + mode_str);
    man.outputs = {out_ply};
    if (!c.force && man.up_to_date(out_ply)) {
        std::cout << "refine: up to date, skipped (use --force to rerun)\n";
        return 0;
    }

    GaussianCloud cloud = read_ply(ply_path);
    Selection sel = load_selection(selection_path);
    Dataset ds = load_dataset(model_dir, images_dir);
    DamageClassSet classes;
    if (!classes_path.empty()) classes = DamageClassSet::load(classes_path);

    std::vector<TrainView> views;
    for (const Camera& cam : ds.cameras) {
        if (!sel.hull_masks.count(cam.id)) continue;  // refinement uses covered views only
        TrainView v;
        v.camera = cam;
        v.target = load_image(ds.img_path.at(cam.id));
        if (!masks_dir.empty()) {
            MaskBuffer m = load_view_mask(masks_dir, cam.id, classes, cam.width, cam.height);
            v.target = composite_mask(v.target, m, classes);
        }
        views.push_back(std::move(v));
    }
    if (views.empty()) throw InputError("refine: no model view has a hull mask");

    size_t count_before = cloud.count;
    TrainReport report = refine(cloud, sel, views, cfg, mode);
    if (mode == RefineMode::finetune && cloud.count != count_before)
        throw ConsistencyError("refine: finetune changed the primitive count");

    AtomicFile out(out_ply);
    write_ply(cloud, out.tmp());
    out.promote();
    json jr = json::parse(report.to_json());
    jr["mode"] = mode_str;
    jr["primitives_before"] = count_before;
    jr["primitives_after"] = cloud.count;
    write_text(out_ply + ".report.json", jr.dump(2));
    man.write(out_ply);
    std::cout << "refine: " << count_before << " -> " << cloud.count << " primitives -> "
              << out_ply << '\n';
    return 0;
}

int cmd_update(const std::string& ply_path, const std::string& joint_model_dir,
               const std::string& images_dir, const std::string& masks_dir,
               const std::string& classes_path, const std::string& survey_path,
               const std::string& mode_str, const std::string& config_path,
               const std::string& out_ply, const std::string& progression_dir, int iterations,
               const Common& c) {
    RefineMode mode = mode_str == "retrain" ? RefineMode::retrain : RefineMode::finetune;
    if (mode_str != "finetune" && mode_str != "retrain")
        throw ConfigError("update: --mode must be finetune or retrain");
    TrainConfig cfg = load_train_config(config_path, c.seed, c.threads, iterations);

    RunManifest man;
    man.add_file(ply_path);
    man.add_dir(joint_model_dir);
    man.add_dir(images_dir);
    man.add_dir(masks_dir);
    man.add_file(classes_path);
    man.add_file(survey_path);
    man.set_config(cfg.to_json() + mode_str);
    man.outputs = {out_ply};
    if (!c.force && man.up_to_date(out_ply)) {
        std::cout << "update: up to date, skipped (use --force to rerun)\n";
        return 0;
    }

    GaussianCloud cloud = read_ply(ply_path);
    DamageClassSet classes = DamageClassSet::load(classes_path);
    Dataset ds = load_dataset(joint_model_dir, images_dir);

    json survey = json::parse(read_text(survey_path));
    std::vector<std::string> new_names = survey.at("new_images").get<std::vector<std::string>>();

    UpdatePlan plan;
    for (const std::string& name : new_names) {
        auto it = std::find_if(ds.cameras.begin(), ds.cameras.end(),
                               [&](const Camera& cam) { return cam.id == name; });
        if (it == ds.cameras.end())
            throw InputError("update: survey image '" + name + "' not in the joint model");
        NewView v;
        v.camera = *it;
        v.image = load_image(ds.img_path.at(name));
        v.mask = load_view_mask(masks_dir, name, classes, it->width, it->height);
        plan.new_views.push_back(std::move(v));
    }

    UpdateConfig ucfg;
    if (c.threads > 0) ucfg.render.threads = c.threads;
    UpdateReport report = update_model(cloud, plan, classes, cfg, mode, ucfg);

    if (!progression_dir.empty()) {
        fs::create_directories(progression_dir);
        for (const auto& [id, prog] : plan.progression_masks)
            save_progression_png(prog, classes.size(), ucfg.preexisting_color, ucfg.new_color,
                                 (fs::path(progression_dir) / id).string());
    }

    AtomicFile out(out_ply);
    write_ply(cloud, out.tmp());
    out.promote();
    write_text(out_ply + ".report.json", report.to_json());
    man.write(out_ply);
    std::cout << "update: " << (report.no_op ? "no new damage, model unchanged"
                                             : std::to_string(report.new_damage_pixels) +
                                                   " new-damage pixels refined")
              << " -> " << out_ply << '\n';
    return 0;
}

int cmd_diff_masks(const std::string& old_dir, const std::string& new_dir,
                   const std::string& classes_path, const std::string& out_dir, int tolerance,
                   const Common&) {
    DamageClassSet classes = DamageClassSet::load(classes_path);
    fs::create_directories(out_dir);
    json shrink = json::object();
    size_t n_files = 0;
    for (const auto& e : fs::directory_iterator(new_dir)) {
        if (!e.is_regular_file()) continue;
        fs::path old_path = fs::path(old_dir) / e.path().filename();
        if (!fs::exists(old_path)) continue;
        MaskBuffer nm = load_mask(e.path().string(), classes);
        MaskBuffer om = load_mask(old_path.string(), classes);
        size_t s = 0;
        MaskBuffer prog = diff_masks(nm, om, classes.size(), tolerance, &s);
        UpdateConfig defaults;
        save_progression_png(prog, classes.size(), defaults.preexisting_color, defaults.new_color,
                             (fs::path(out_dir) / e.path().filename()).string());
        shrink[e.path().filename().string()] = s;
        ++n_files;
    }
    if (n_files == 0) throw InputError("diff-masks: no matching mask pairs");
    write_text((fs::path(out_dir) / "shrinkage.json").string(), shrink.dump(2));
    std::cout << "diff-masks: " << n_files << " views -> " << out_dir << '\n';
    return 0;
}

int cmd_metrics(const std::string& ply_path, const std::string& model_dir,
                const std::string& gt_masks_dir, const std::string& classes_path,
                const std::string& images_dir, const std::string& out_json, const Common& c) {
    GaussianCloud cloud = read_ply(ply_path);
    DamageClassSet classes = DamageClassSet::load(classes_path);
    SparseModel model = parse_colmap_text(model_dir);
    std::vector<Camera> cameras = cameras_from_colmap(model);

    RenderOptions opt;
    if (c.threads > 0) opt.threads = c.threads;

    json j;
    j["views"] = json::object();
    std::vector<double> iou_acc(classes.size(), 0.0);
    std::vector<size_t> iou_n(classes.size(), 0);
    double psnr_acc = 0.0;
    size_t psnr_n = 0;

    for (const Camera& cam : cameras) {
        RenderOutput ro = render(cloud, cam, opt);
        MaskBuffer gt = load_view_mask(gt_masks_dir, cam.id, classes, cam.width, cam.height);
        MaskBuffer got = extract_mask(ro.image, classes);
        json jv;
        for (size_t k = 1; k <= classes.size(); ++k) {
            double iou = mask_iou(gt, got, static_cast<uint8_t>(k));
            jv["iou"][classes.at_label(static_cast<uint8_t>(k)).name] = iou;
            iou_acc[k - 1] += iou;
            iou_n[k - 1] += 1;
        }
        if (!images_dir.empty()) {
            ImageBuffer img = load_image((fs::path(images_dir) / cam.id).string());
            ImageBuffer target = composite_mask(img, gt, classes);
            double p = psnr(ro.image, target);
            jv["psnr"] = p;
            psnr_acc += p;
            psnr_n += 1;
        }
        j["views"][cam.id] = jv;
    }
    for (size_t k = 0; k < classes.size(); ++k)
        if (iou_n[k])
            j["mean_iou"][classes.classes()[k].name] = iou_acc[k] / iou_n[k];
    if (psnr_n) j["mean_psnr"] = psnr_acc / psnr_n;

    if (out_json.empty())
        std::cout << j.dump(2) << '\n';
    else {
        write_text(out_json, j.dump(2));
        std::cout << "metrics: " << cameras.size() << " views -> " << out_json << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-splat damage twins: train, visualize, and update"};
    app.require_subcommand(1);

    Common c;
    app.add_option("--seed", c.seed, "Seed for every stochastic stage")
        ->envname("SPLATTWIN_SEED");
    app.add_option("--threads", c.threads, "Worker threads (0 = config/default)")
        ->envname("SPLATTWIN_THREADS");
    app.add_flag("--force", c.force, "Rerun even when outputs are up to date");

    // synth
    std::string sy_spec, sy_out;
    bool sy_prog = false;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic facade dataset");
    synth_cmd->add_option("--spec", sy_spec, "SynthSpec JSON (defaults to built-in damage)");
    synth_cmd->add_option("--out", sy_out, "Output dataset directory")->required();
    synth_cmd->add_flag("--with-progression", sy_prog, "Also emit a new survey with added damage");

    // train
    std::string tr_model, tr_images, tr_masks, tr_classes, tr_config, tr_out;
    int tr_iters = -1;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a COLMAP text model");
    train_cmd->add_option("--model", tr_model, "COLMAP text model directory")->required();
    train_cmd->add_option("--images", tr_images, "Image directory")->required();
    train_cmd->add_option("--masks", tr_masks, "Damage mask directory (enables compositing)");
    train_cmd->add_option("--classes", tr_classes, "Damage classes JSON");
    train_cmd->add_option("--config", tr_config, "TrainConfig JSON");
    train_cmd->add_option("--iterations", tr_iters, "Override config iterations");
    train_cmd->add_option("--out", tr_out, "Output PLY path")->required();

    // render
    std::string re_ply, re_model, re_view, re_pose, re_out, re_classes;
    bool re_extract = false;
    auto* render_cmd = app.add_subcommand("render", "Render one view from a PLY model");
    render_cmd->add_option("--ply", re_ply, "Model PLY")->required();
    render_cmd->add_option("--model", re_model, "COLMAP model (with --view)");
    render_cmd->add_option("--view", re_view, "Image name inside --model");
    render_cmd->add_option("--camera", re_pose, "Camera pose JSON");
    render_cmd->add_option("--out", re_out, "Output image (.png or .ppm)")->required();
    render_cmd->add_option("--classes", re_classes, "Damage classes JSON (for --extract-masks)");
    render_cmd->add_flag("--extract-masks", re_extract, "Also write the extracted damage mask");

    // select
    std::string se_ply, se_model, se_masks, se_classes, se_out, se_mask_out;
    int se_vmin = 2, se_kmin = 50, se_dilation = 8;
    auto* select_cmd = app.add_subcommand("select", "Select damage primitives and hull masks");
    select_cmd->add_option("--ply", se_ply)->required();
    select_cmd->add_option("--model", se_model, "COLMAP text model directory")->required();
    select_cmd->add_option("--masks", se_masks, "Damage mask directory")->required();
    select_cmd->add_option("--classes", se_classes)->required();
    select_cmd->add_option("--out", se_out, "Selection JSON path")->required();
    select_cmd->add_option("--mask-out", se_mask_out, "Hull mask directory");
    select_cmd->add_option("--v-min", se_vmin, "Views required for projection validation");
    select_cmd->add_option("--k-min", se_kmin, "Minimum neighbor count");
    select_cmd->add_option("--dilation", se_dilation, "Hull mask dilation (px)");

    // refine
    std::string rf_ply, rf_sel, rf_model, rf_images, rf_masks, rf_classes, rf_mode = "finetune",
                                                                           rf_config, rf_out;
    int rf_iters = -1;
    auto* refine_cmd = app.add_subcommand("refine", "Refine the selected primitives");
    refine_cmd->add_option("--ply", rf_ply)->required();
    refine_cmd->add_option("--selection", rf_sel)->required();
    refine_cmd->add_option("--model", rf_model)->required();
    refine_cmd->add_option("--images", rf_images, "High-resolution image directory")->required();
    refine_cmd->add_option("--masks", rf_masks, "Damage mask directory");
    refine_cmd->add_option("--classes", rf_classes);
    refine_cmd->add_option("--mode", rf_mode, "finetune|retrain");
    refine_cmd->add_option("--config", rf_config, "TrainConfig JSON");
    refine_cmd->add_option("--iterations", rf_iters, "Override config iterations");
    refine_cmd->add_option("--out", rf_out)->required();

    // update
    std::string up_ply, up_model, up_images, up_masks, up_classes, up_survey,
        up_mode = "finetune", up_config, up_out, up_prog;
    int up_iters = -1;
    auto* update_cmd = app.add_subcommand("update", "Update the twin from a new survey");
    update_cmd->add_option("--ply", up_ply)->required();
    update_cmd->add_option("--joint-model", up_model, "Joint COLMAP model (old + new images)")
        ->required();
    update_cmd->add_option("--images", up_images)->required();
    update_cmd->add_option("--masks", up_masks)->required();
    update_cmd->add_option("--classes", up_classes)->required();
    update_cmd->add_option("--new-survey", up_survey, "JSON listing new-survey image names")
        ->required();
    update_cmd->add_option("--mode", up_mode, "finetune|retrain");
    update_cmd->add_option("--config", up_config, "TrainConfig JSON");
    update_cmd->add_option("--iterations", up_iters, "Override config iterations");
    update_cmd->add_option("--out", up_out)->required();
    update_cmd->add_option("--progression-out", up_prog, "Progression mask directory");

    // diff-masks
    std::string dm_old, dm_new, dm_classes, dm_out;
    int dm_tol = 3;
    auto* diff_cmd = app.add_subcommand("diff-masks", "Standalone progression masks");
    diff_cmd->add_option("--old", dm_old, "Old mask directory")->required();
    diff_cmd->add_option("--new", dm_new, "New mask directory")->required();
    diff_cmd->add_option("--classes", dm_classes)->required();
    diff_cmd->add_option("--out", dm_out)->required();
    diff_cmd->add_option("--tolerance", dm_tol, "Diff tolerance (px)");

    // metrics
    std::string me_ply, me_model, me_masks, me_classes, me_images, me_out;
    auto* metrics_cmd = app.add_subcommand("metrics", "IoU / PSNR report for a model");
    metrics_cmd->add_option("--ply", me_ply)->required();
    metrics_cmd->add_option("--model", me_model)->required();
    metrics_cmd->add_option("--gt-masks", me_masks, "Ground-truth mask directory")->required();
    metrics_cmd->add_option("--classes", me_classes)->required();
    metrics_cmd->add_option("--images", me_images, "Original images (enables PSNR)");
    metrics_cmd->add_option("--out", me_out, "Report JSON path (stdout when omitted)");

    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; }))
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) return cmd_synth(sy_spec, sy_out, sy_prog, c);
        if (*train_cmd)
            return cmd_train(tr_model, tr_images, tr_masks, tr_classes, tr_config, tr_out,
                             tr_iters, c);
        if (*render_cmd)
            return cmd_render(re_ply, re_model, re_view, re_pose, re_out, re_classes, re_extract,
                              c);
        if (*select_cmd)
            return cmd_select(se_ply, se_model, se_masks, se_classes, se_out, se_mask_out,
                              se_vmin, se_kmin, se_dilation, c);
        if (*refine_cmd)
            return cmd_refine(rf_ply, rf_sel, rf_model, rf_images, rf_masks, rf_classes, rf_mode,
                              rf_config, rf_out, rf_iters, c);
        if (*update_cmd)
            return cmd_update(up_ply, up_model, up_images, up_masks, up_classes, up_survey,
                              up_mode, up_config, up_out, up_prog, up_iters, c);
        if (*diff_cmd) return cmd_diff_masks(dm_old, dm_new, dm_classes, dm_out, dm_tol, c);
        if (*metrics_cmd)
            return cmd_metrics(me_ply, me_model, me_masks, me_classes, me_images, me_out, c);
    } catch (const ParseError& e) {
        std::cerr << "SPLATTWIN_ERROR code=parse msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "SPLATTWIN_ERROR code=config msg=\"" << e.what() << "\"\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "SPLATTWIN_ERROR code=input msg=\"" << e.what() << "\"\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "SPLATTWIN_ERROR code=numerical msg=\"" << e.what() << "\"\n";
        return 5;
    } catch (const ConsistencyError& e) {
        std::cerr << "SPLATTWIN_ERROR code=consistency msg=\"" << e.what() << "\"\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "SPLATTWIN_ERROR code=internal msg=\"" << e.what() << "\"\n";
        return 10;
    }
    return 0;
}

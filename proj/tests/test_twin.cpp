#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splat/core/projection.hpp"
#include "splat/twin/twin_update.hpp"

using namespace splat;

namespace {

constexpr double kC0 = 0.28209479177387814;

Camera look_at(const Vec3& eye, const Vec3& at, int wh = 48, double f = 40.0,
               const std::string& id = "cam") {
    Vec3 fwd = (at - eye).normalized();
    Vec3 up(0, -1, 0);
    Vec3 right = up.cross(fwd).normalized();
    Camera cam;
    cam.width = cam.height = wh;
    cam.fx = cam.fy = f;
    cam.cx = cam.cy = wh / 2.0;
    cam.world_to_camera_rotation.row(0) = right.transpose();
    cam.world_to_camera_rotation.row(1) = fwd.cross(right).transpose();
    cam.world_to_camera_rotation.row(2) = fwd.transpose();
    cam.world_to_camera_translation = -cam.world_to_camera_rotation * eye;
    cam.id = id;
    return cam;
}

void set_color(GaussianCloud& c, size_t i, const Vec3& rgb) {
    c.sh_coeffs[i][0] = (rgb.array() - 0.5) / kC0;
}

GaussianCloud facade_grid(int nx, int ny, double spacing, const Vec3& rgb) {
    GaussianCloud c;
    c.sh_degree = 0;
    c.resize(static_cast<size_t>(nx) * ny);
    size_t i = 0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x, ++i) {
            c.positions[i] = Vec3((x - (nx - 1) / 2.0) * spacing, (y - (ny - 1) / 2.0) * spacing,
                                  0.0);
            // narrow footprints keep neighbor blending from washing colors out
            c.log_scales[i] = Vec3(std::log(spacing * 0.35), std::log(spacing * 0.35),
                                   std::log(spacing * 0.03));
            c.logit_opacities[i] = logit(0.95);
            set_color(c, i, rgb);
        }
    return c;
}

DamageClassSet two_classes() {
    return DamageClassSet({{"spalling", Vec3(1, 0, 0), 0.15}, {"crack", Vec3(0, 0, 1), 0.15}});
}

}  // namespace

TEST_CASE("progression label helpers") {
    CHECK(!progression_is_new(0, 2));
    CHECK(!progression_is_new(1, 2));
    CHECK(!progression_is_new(2, 2));
    CHECK(progression_is_new(3, 2));
    CHECK(progression_is_new(4, 2));
    CHECK(!progression_is_new(kAnyDamage, 2));
    CHECK(progression_class(3, 2) == 1);
    CHECK(progression_class(4, 2) == 2);
    CHECK(progression_class(1, 2) == 1);
    CHECK(progression_class(0, 2) == 0);
}

TEST_CASE("diff_masks separates preexisting from new damage") {
    MaskBuffer old_m(20, 10), new_m(20, 10);
    // old: class-1 block on the left
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) old_m.at(x, y) = 1;
    // new survey sees the same block plus a distant class-1 block
    new_m.labels = old_m.labels;
    for (int y = 2; y < 6; ++y)
        for (int x = 14; x < 18; ++x) new_m.at(x, y) = 1;

    size_t shrink = 123;
    MaskBuffer prog = diff_masks(new_m, old_m, 2, 3, &shrink);
    CHECK(prog.at(3, 3) == 1);    // preexisting(1)
    CHECK(prog.at(15, 3) == 3);   // new(1) = K + 1
    CHECK(prog.at(0, 0) == 0);
    CHECK(shrink == 0);
}

TEST_CASE("diff_masks tolerance absorbs small boundary drift") {
    MaskBuffer old_m(20, 10), new_m(20, 10);
    old_m.at(5, 5) = 1;
    new_m.at(7, 5) = 1;  // 2 px away
    MaskBuffer prog = diff_masks(new_m, old_m, 1, 3, nullptr);
    CHECK(prog.at(7, 5) == 1);  // within tolerance -> preexisting

    prog = diff_masks(new_m, old_m, 1, 1, nullptr);
    CHECK(prog.at(7, 5) == 2);  // beyond tolerance -> new
}

TEST_CASE("diff_masks matches class identity, not just presence") {
    MaskBuffer old_m(20, 10), new_m(20, 10);
    old_m.at(5, 5) = 2;  // crack here before
    new_m.at(5, 5) = 1;  // spalling here now
    MaskBuffer prog = diff_masks(new_m, old_m, 2, 3, nullptr);
    CHECK(prog.at(5, 5) == 3);  // new(1): class 1 was not present before
}

TEST_CASE("kAnyDamage in the old mask matches every class") {
    MaskBuffer old_m(20, 10), new_m(20, 10);
    old_m.at(5, 5) = kAnyDamage;
    new_m.at(5, 5) = 1;
    new_m.at(6, 5) = 2;
    MaskBuffer prog = diff_masks(new_m, old_m, 2, 3, nullptr);
    CHECK(prog.at(5, 5) == 1);  // preexisting despite the unknown old class
    CHECK(prog.at(6, 5) == 2);
}

TEST_CASE("diff_masks reports shrinkage without erasing it") {
    MaskBuffer old_m(30, 10), new_m(30, 10);
    for (int x = 2; x < 8; ++x) old_m.at(x, 5) = 1;  // old damage, gone in the new survey
    new_m.at(20, 5) = 1;                             // unrelated new damage
    size_t shrink = 0;
    MaskBuffer prog = diff_masks(new_m, old_m, 2, 3, &shrink);
    CHECK(shrink == 6);
    // the shrunk pixels carry no progression label
    for (int x = 2; x < 8; ++x) CHECK(prog.at(x, 5) == 0);

    // old pixels near surviving new damage do not count as shrinkage
    new_m.at(3, 5) = 1;
    diff_masks(new_m, old_m, 2, 3, &shrink);
    CHECK(shrink < 6);

    // vanished kAnyDamage is also reported
    old_m.at(25, 8) = kAnyDamage;
    new_m = MaskBuffer(30, 10);
    diff_masks(new_m, old_m, 2, 3, &shrink);
    CHECK(shrink == 7);
}

TEST_CASE("diff_masks input validation") {
    MaskBuffer a(4, 4), b(5, 5);
    CHECK_THROWS_AS(diff_masks(a, b, 1, 3, nullptr), InputError);
    MaskBuffer c(4, 4);
    CHECK_THROWS_AS(diff_masks(a, c, 0, 3, nullptr), InputError);
    CHECK_THROWS_AS(diff_masks(a, c, 130, 3, nullptr), InputError);
    CHECK_THROWS_AS(diff_masks(a, c, 2, -1, nullptr), InputError);
}

TEST_CASE("recolor_progression paints the two progression states") {
    ImageBuffer img(4, 1, Vec3::Constant(0.5));
    MaskBuffer prog(4, 1);
    prog.at(1, 0) = 1;  // preexisting(1)
    prog.at(2, 0) = 3;  // new(1), K=2
    Vec3 blue(0, 0, 1), green(0, 1, 0);
    ImageBuffer out = recolor_progression(img, prog, 2, blue, green);
    CHECK(out.at(0, 0) == Vec3::Constant(0.5));
    CHECK(out.at(1, 0) == blue);
    CHECK(out.at(2, 0) == green);
    CHECK(out.at(3, 0) == Vec3::Constant(0.5));

    // swapping the colors swaps the painting
    ImageBuffer swapped = recolor_progression(img, prog, 2, green, blue);
    CHECK(swapped.at(1, 0) == green);
    CHECK(swapped.at(2, 0) == blue);
}

TEST_CASE("recolor_progression rejects colliding colors") {
    ImageBuffer img(2, 1);
    MaskBuffer prog(2, 1);
    CHECK_THROWS_AS(recolor_progression(img, prog, 1, Vec3(0, 1, 0), Vec3(0, 1, 0)), ConfigError);
    CHECK_THROWS_AS(recolor_progression(img, prog, 1, Vec3(0, 1, 0), Vec3(0.1, 0.9, 0)),
                    ConfigError);
    CHECK_THROWS_AS(recolor_progression(img, MaskBuffer(3, 1), 1, Vec3(0, 0, 1), Vec3(0, 1, 0)),
                    InputError);
}

TEST_CASE("render_segmentation_views recovers painted damage regions") {
    GaussianCloud c = facade_grid(6, 6, 0.3, Vec3(0.45, 0.5, 0.45));
    std::vector<size_t> red = {14, 15};
    for (size_t i : red) set_color(c, i, Vec3(1, 0, 0));
    std::vector<Camera> cams = {look_at(Vec3(0, 0, -3), Vec3::Zero(), 48, 40.0, "a"),
                                look_at(Vec3(0.5, 0.2, -3), Vec3::Zero(), 48, 40.0, "b")};
    auto masks = render_segmentation_views(c, cams, two_classes());
    REQUIRE(masks.size() == 2);
    for (const Camera& cam : cams) {
        const MaskBuffer& m = masks.at(cam.id);
        CHECK(!m.empty_mask());
        for (size_t i : red) {
            Vec2 p = project_point(cam, world_to_camera(cam, c.positions[i]));
            CHECK(m.at(static_cast<int>(std::lround(p[0])), static_cast<int>(std::lround(p[1]))) ==
                  1);
        }
    }

    std::vector<Camera> dup = {cams[0], cams[0]};
    CHECK_THROWS_AS(render_segmentation_views(c, dup, two_classes()), InputError);
}

TEST_CASE("prepare_plan tags recolored damage as kAnyDamage") {
    // a facade already carrying update colors from an earlier pass
    GaussianCloud c = facade_grid(6, 6, 0.3, Vec3(0.45, 0.5, 0.45));
    set_color(c, 14, Vec3(0, 1, 0));  // green: previously detected new damage
    set_color(c, 21, Vec3(0, 0, 1));  // blue is also the crack class color here

    UpdatePlan plan;
    Camera cam = look_at(Vec3(0, 0, -3), Vec3::Zero(), 48, 40.0, "n0");
    NewView v;
    v.camera = cam;
    v.image = render(c, cam).image;
    v.mask = MaskBuffer(48, 48);
    Vec2 p14 = project_point(cam, world_to_camera(cam, c.positions[14]));
    v.mask.at(static_cast<int>(std::lround(p14[0])), static_cast<int>(std::lround(p14[1]))) = 1;
    plan.new_views.push_back(v);

    UpdateConfig cfg;
    prepare_plan(plan, c, two_classes(), cfg);
    const MaskBuffer& rendered = plan.rendered_masks.at("n0");
    int px = static_cast<int>(std::lround(p14[0])), py = static_cast<int>(std::lround(p14[1]));
    CHECK(rendered.at(px, py) == kAnyDamage);
    // so the survey's class-1 pixel there reads as preexisting, not new
    CHECK(plan.progression_masks.at("n0").at(px, py) == 1);
}

TEST_CASE("prepare_plan validates views") {
    GaussianCloud c = facade_grid(2, 2, 0.3, Vec3(0.5, 0.5, 0.5));
    UpdateConfig cfg;
    UpdatePlan empty;
    CHECK_THROWS_AS(prepare_plan(empty, c, two_classes(), cfg), InputError);

    UpdatePlan bad;
    NewView v;
    v.camera = look_at(Vec3(0, 0, -3), Vec3::Zero(), 48, 40.0, "x");
    v.image = ImageBuffer(48, 48);
    v.mask = MaskBuffer(10, 10);
    bad.new_views.push_back(v);
    CHECK_THROWS_AS(prepare_plan(bad, c, two_classes(), cfg), InputError);

    UpdatePlan badlabel;
    v.mask = MaskBuffer(48, 48);
    v.mask.at(0, 0) = 9;
    badlabel.new_views.push_back(v);
    CHECK_THROWS_AS(prepare_plan(badlabel, c, two_classes(), cfg), InputError);
}

TEST_CASE("update_model is a strict no-op when the survey shows nothing new") {
    GaussianCloud c = facade_grid(6, 6, 0.3, Vec3(0.45, 0.5, 0.45));
    set_color(c, 14, Vec3(1, 0, 0));
    GaussianCloud before = c;

    DamageClassSet cs = two_classes();
    std::vector<Camera> cams = {look_at(Vec3(0, 0, -3), Vec3::Zero(), 48, 40.0, "n0"),
                                look_at(Vec3(0.4, 0, -3), Vec3::Zero(), 48, 40.0, "n1")};
    UpdatePlan plan;
    for (const Camera& cam : cams) {
        NewView v;
        v.camera = cam;
        RenderOutput ro = render(c, cam);
        v.image = ro.image;
        v.mask = extract_mask(ro.image, cs);  // identical to what the model renders
        plan.new_views.push_back(v);
    }

    TrainConfig tcfg;
    tcfg.iterations = 5;
    UpdateReport rep = update_model(c, plan, cs, tcfg, RefineMode::finetune);
    CHECK(rep.no_op);
    CHECK(rep.new_damage_pixels == 0);
    for (size_t i = 0; i < c.count; ++i) {
        CHECK(c.positions[i] == before.positions[i]);
        CHECK(c.sh_coeffs[i][0] == before.sh_coeffs[i][0]);
        CHECK(c.logit_opacities[i] == before.logit_opacities[i]);
        CHECK(c.damage_label[i] == before.damage_label[i]);
    }
}

TEST_CASE("update_model selects, labels, and refines under new damage") {
    GaussianCloud c = facade_grid(6, 6, 0.3, Vec3(0.45, 0.5, 0.45));
    set_color(c, 8, Vec3(1, 0, 0));  // preexisting spalling

    DamageClassSet cs = two_classes();
    std::vector<Camera> cams = {look_at(Vec3(0, 0, -3), Vec3::Zero(), 48, 40.0, "n0"),
                                look_at(Vec3(0.4, 0.1, -3), Vec3::Zero(), 48, 40.0, "n1"),
                                look_at(Vec3(-0.4, -0.1, -3), Vec3::Zero(), 48, 40.0, "n2")};

    // the survey finds new spalling where primitive 27 sits
    size_t newly_damaged = 27;
    UpdatePlan plan;
    for (const Camera& cam : cams) {
        NewView v;
        v.camera = cam;
        RenderOutput ro = render(c, cam);
        v.image = ro.image;
        v.mask = extract_mask(ro.image, cs);
        Vec2 p = project_point(cam, world_to_camera(cam, c.positions[newly_damaged]));
        for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) {
                int qx = static_cast<int>(std::lround(p[0])) + dx;
                int qy = static_cast<int>(std::lround(p[1])) + dy;
                if (qx >= 0 && qx < 48 && qy >= 0 && qy < 48) v.mask.at(qx, qy) = 1;
            }
        plan.new_views.push_back(v);
    }

    TrainConfig tcfg;
    tcfg.iterations = 25;
    UpdateConfig cfg;
    cfg.neighbor_k_min = 4;
    UpdateReport rep = update_model(c, plan, cs, tcfg, RefineMode::finetune, cfg);

    CHECK(!rep.no_op);
    CHECK(rep.new_damage_pixels > 0);
    const auto& idx = rep.selection.damage_indices;
    CHECK(std::find(idx.begin(), idx.end(), newly_damaged) != idx.end());
    CHECK(std::find(idx.begin(), idx.end(), size_t{8}) != idx.end());
    CHECK(c.damage_label[newly_damaged] == 1);
    CHECK(c.damage_label[8] == 1);
    // refinement ran and left nothing frozen
    for (uint8_t f : c.frozen) CHECK(f == 0);
    CHECK(rep.refine_report.entries.size() > 0);
    for (const auto& [id, s] : rep.shrinkage_pixels) CHECK(s == 0);
}

TEST_CASE("update_model rejects a new-damage color colliding with a class") {
    GaussianCloud c = facade_grid(2, 2, 0.3, Vec3(0.5, 0.5, 0.5));
    DamageClassSet cs({{"moss", Vec3(0, 1, 0), 0.15}});
    UpdatePlan plan;
    NewView v;
    v.camera = look_at(Vec3(0, 0, -3), Vec3::Zero(), 48, 40.0, "x");
    v.image = ImageBuffer(48, 48);
    v.mask = MaskBuffer(48, 48);
    plan.new_views.push_back(v);
    TrainConfig tcfg;
    CHECK_THROWS_AS(update_model(c, plan, cs, tcfg, RefineMode::finetune), ConfigError);
}

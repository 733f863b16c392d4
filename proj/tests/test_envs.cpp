#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "toolmeta/envs/render.hpp"
#include "toolmeta/envs/task_env.hpp"
#include "toolmeta/envs/tool_catalog.hpp"
#include "toolmeta/errors.hpp"

using namespace toolmeta;
using namespace toolmeta::envs;

namespace {

const std::vector<ToolSpec>& catalog() {
  static const auto c = generate_catalog(7);
  return c;
}

double brute_distance(const ToolSpec& a, const ToolSpec& b) {
  // Independent normalisation: parameter ranges written out again here.
  const double lo[6] = {0.08, 0.010, 0.02, 0.010, -std::numbers::pi / 2, 0.0};
  const double hi[6] = {0.32, 0.050, 0.16, 0.070, std::numbers::pi / 2, 1.0};
  const double pa[6] = {a.handle_length, a.handle_width, a.head_length, a.head_width,
                        a.head_angle, a.grasp_offset / a.handle_length};
  const double pb[6] = {b.handle_length, b.handle_width, b.head_length, b.head_width,
                        b.head_angle, b.grasp_offset / b.handle_length};
  double s = 0;
  for (int i = 0; i < 6; ++i) {
    const double d = (pa[i] - pb[i]) / (hi[i] - lo[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Reward table rows as weights, independent of the environment code.
struct Row {
  Task task;
  std::vector<double> weights;
};
const std::vector<Row> kTable = {{Task::pushing, {1.0}},
                                 {Task::lifting, {0.1, 0.5}},
                                 {Task::sweeping, {0.1, 0.1, 0.5}},
                                 {Task::hammering, {0.1, 0.1, 0.5}}};

}  // namespace

TEST_CASE("catalog is deterministic with a 27/9 split") {
  const auto a = generate_catalog(7), b = generate_catalog(7);
  REQUIRE(a.size() == 36);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].handle_length == b[i].handle_length);
    CHECK(a[i].head_angle == b[i].head_angle);
    CHECK(a[i].grasp_offset == b[i].grasp_offset);
  }
  CHECK(tools_in_split(a, Split::train).size() == 27);
  CHECK(tools_in_split(a, Split::test).size() == 9);
  std::vector<int> ids;
  for (const auto& t : a) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  CHECK(generate_catalog(8)[0].handle_length != a[0].handle_length);
}

TEST_CASE("held-out tools sit apart from the training tools") {
  for (std::uint64_t seed : {0u, 7u, 11u, 123u}) {
    const auto cat = generate_catalog(seed);
    const auto train = tools_in_split(cat, Split::train);
    const auto test = tools_in_split(cat, Split::test);
    std::vector<double> train_nn;
    for (std::size_t i = 0; i < train.size(); ++i) {
      double best = 1e9;
      for (std::size_t j = 0; j < train.size(); ++j)
        if (i != j) best = std::min(best, brute_distance(train[i], train[j]));
      train_nn.push_back(best);
    }
    std::sort(train_nn.begin(), train_nn.end());
    const double median = (train_nn[13]);
    for (const auto& t : test) {
      double best = 1e9;
      bool nearest_is_train = true;
      for (const auto& o : cat) {
        if (o.id == t.id) continue;
        const double d = brute_distance(t, o);
        CHECK(std::abs(d - geometry_distance(t, o)) < 1e-12);
        if (d < best) {
          best = d;
          nearest_is_train = o.split == Split::train;
        }
      }
      CAPTURE(seed);
      CAPTURE(t.name);
      CHECK(nearest_is_train);
      CHECK(best > median);
    }
  }
}

TEST_CASE("catalog file round trip and diagnostics") {
  const auto path = std::filesystem::temp_directory_path() / "toolmeta_test_tools.tsv";
  write_catalog(path, catalog());
  const auto back = read_catalog(path);
  REQUIRE(back.size() == catalog().size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].name == catalog()[i].name);
    CHECK(back[i].head_angle == catalog()[i].head_angle);
    CHECK(back[i].mass == catalog()[i].mass);
    CHECK(back[i].split == catalog()[i].split);
  }
  {
    std::ofstream os(path, std::ios::app);
    os << "99\tbroken\tx\t0.1\n";
  }
  try {
    read_catalog(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.record() == 39);
  }
  std::filesystem::remove(path);
}

TEST_CASE("action bounds and episode lengths per task") {
  const double q = std::numbers::pi / 4;
  auto p = TaskConfig::for_task(Task::pushing);
  CHECK(p.action_low == std::vector<double>{-0.05, -0.1, -q});
  CHECK(p.action_high == std::vector<double>{0.15, 0.1, q});
  CHECK(p.episode_length == 25);
  auto l = TaskConfig::for_task(Task::lifting);
  CHECK(l.action_low == std::vector<double>{-0.1, -0.1, -0.1, -q});
  CHECK(l.episode_length == 25);
  for (Task t : {Task::sweeping, Task::hammering}) {
    auto c = TaskConfig::for_task(t);
    CHECK(c.action_high == std::vector<double>{0.2, 0.2, 0.2, q});
    CHECK(c.episode_length == 40);
  }
}

TEST_CASE("every reward row at zero, initial and half distances") {
  for (const auto& row : kTable) {
    TaskEnv env(row.task);
    env.reset(catalog()[0], 3);
    const auto terms = env.reward_terms();
    REQUIRE(terms.count == row.weights.size());
    for (std::size_t i = 0; i < terms.count; ++i) CHECK(terms.weights[i] == row.weights[i]);
    const auto init = env.state().initial_distances;
    RewardTerms t = terms;
    double full = 0;
    for (double w : row.weights) full += w;
    for (std::size_t i = 0; i < t.count; ++i) t.distances[i] = 0.0;
    CHECK(std::abs(shaped_reward(t, init) - full) < 1e-12);
    for (std::size_t i = 0; i < t.count; ++i) t.distances[i] = init[i];
    CHECK(std::abs(shaped_reward(t, init)) < 1e-12);
    for (std::size_t i = 0; i < t.count; ++i) t.distances[i] = init[i] / 2;
    CHECK(std::abs(shaped_reward(t, init) - full / 2) < 1e-12);
    for (std::size_t i = 0; i < t.count; ++i) t.distances[i] = 3 * init[i];
    CHECK(shaped_reward(t, init) == 0.0);
    // Right after reset every term sits at its initial distance.
    CHECK(std::abs(env.reward()) < 1e-12);
  }
}

TEST_CASE("pushing reward is 1 with the tool on the target") {
  TaskEnv env(Task::pushing);
  env.reset(catalog()[4], 1);
  auto s = env.state();
  const Vec2 c = env.tool_centroid_world();
  s.tool.x += s.target.x - c.x;
  s.tool.y += s.target.y - c.y;
  env.set_state(s);
  CHECK(std::abs(env.reward() - 1.0) < 1e-12);
}

TEST_CASE("pushing reward increases strictly as the tool approaches") {
  TaskEnv env(Task::pushing);
  env.reset(catalog()[4], 2);
  const auto s0 = env.state();
  const Vec2 c0 = env.tool_centroid_world();
  double prev = -1;
  for (int k = 1; k < 20; ++k) {
    auto s = s0;
    const double f = k / 20.0;
    s.tool.x += f * (s0.target.x - c0.x);
    s.tool.y += f * (s0.target.y - c0.y);
    env.set_state(s);
    CHECK(env.reward() > prev);
    prev = env.reward();
  }
}

TEST_CASE("lifting at half distances gives 0.30") {
  TaskEnv env(Task::lifting);
  env.reset(catalog()[2], 5);
  auto s = env.state();
  const auto init = s.initial_distances;
  CHECK(std::abs(init[1] - 0.15) < 1e-12);
  s.tool_z = 0.075;
  const Vec2 g = env.grasp_point_world();
  s.ee = {g.x, g.y, s.tool_z + init[0] / 2, 0.0};
  env.set_state(s);
  CHECK(std::abs(env.reward() - 0.30) < 1e-12);
}

TEST_CASE("sweeping reward is 0 at the initial layout") {
  TaskEnv env(Task::sweeping);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    env.reset(catalog()[seed % 36], seed);
    CHECK(std::abs(env.reward()) < 1e-12);
  }
}

TEST_CASE("hammering with the nail driven and tool on the nail gives 0.7") {
  TaskEnv env(Task::hammering);
  env.reset(catalog()[0], 9);
  auto s = env.state();
  s.grasped = true;
  s.nail_depth = env.config().nail_exposed;
  s.tool_z = 0.0;
  env.set_state(s);
  const Vec2 h = env.head_center_world();
  s.tool.x += s.object.x - h.x;
  s.tool.y += s.object.y - h.y;
  const Vec2 g = s.tool.apply(env.tool().grasp_point());
  s.ee = {g.x, g.y, 0.02, 0.0};
  env.set_state(s);
  CHECK(std::abs(env.reward() - 0.7) < 1e-12);
}

TEST_CASE("rewards stay in [0, 1] under random actions") {
  std::mt19937_64 rng(4);
  for (const auto& row : kTable) {
    TaskEnv env(row.task);
    for (int ep = 0; ep < 6; ++ep) {
      env.reset(catalog()[(ep * 5) % 36], ep);
      const auto& c = env.config();
      for (int t = 0; t < c.episode_length; ++t) {
        std::vector<double> a(c.action_dim());
        for (std::size_t i = 0; i < a.size(); ++i)
          a[i] = std::uniform_real_distribution<double>(c.action_low[i], c.action_high[i])(rng);
        const auto r = env.step(a);
        CHECK(r.reward >= 0.0);
        CHECK(r.reward <= 1.0 + 1e-12);
        CHECK(r.observation.size() == TaskEnv::kStateObservationSize);
      }
    }
  }
}

TEST_CASE("done exactly at the episode length") {
  for (const auto& row : kTable) {
    TaskEnv env(row.task);
    env.reset(catalog()[1], 0);
    const auto& c = env.config();
    std::vector<double> zero(c.action_dim(), 0.0);
    for (int t = 1; t <= c.episode_length; ++t) {
      const auto r = env.step(zero);
      CHECK(r.done == (t == c.episode_length));
    }
    CHECK(env.state().step_index == c.episode_length);
    CHECK_THROWS_AS(env.step(zero), Error);
  }
}

TEST_CASE("reset is deterministic and initial distances are usable") {
  for (const auto& row : kTable) {
    TaskEnv a(row.task), b(row.task);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto& tool = catalog()[seed % 36];
      a.reset(tool, seed);
      b.reset(tool, seed);
      CHECK(a.state() == b.state());
      const auto terms = a.reward_terms();
      for (std::size_t i = 0; i < terms.count; ++i) CHECK(a.state().initial_distances[i] >= 1e-3);
      CHECK(a.state().step_index == 0);
    }
  }
}

TEST_CASE("step is deterministic and rejects bad actions") {
  TaskEnv a(Task::sweeping), b(Task::sweeping);
  a.reset(catalog()[3], 1);
  b.reset(catalog()[3], 1);
  const std::vector<double> act = {0.1, -0.05, -0.2, 0.3};
  for (int i = 0; i < 10; ++i) {
    a.step(act);
    b.step(act);
    CHECK(a.state() == b.state());
  }
  const std::vector<double> nan = {std::nan(""), 0, 0, 0};
  CHECK_THROWS_AS(a.step(nan), NonFiniteError);
  CHECK_THROWS_AS(a.step(std::vector<double>{0, 0, 0}), Error);
  const int before = a.state().clamp_count;
  a.step(std::vector<double>{5.0, 0, 0, 0});
  CHECK(a.state().clamp_count == before + 1);
}

TEST_CASE("grasp heuristic") {
  const auto& tool = catalog()[0];
  TaskEnv env(Task::lifting);
  env.reset(tool, 0);
  const auto s0 = env.state();
  const Vec2 g = env.grasp_point_world();

  SUBCASE("far from the tool stays open") {
    auto s = s0;
    s.ee = {g.x + 0.2, g.y, 0.02, 0.0};
    env.set_state(s);
    env.grasp_update();
    CHECK_FALSE(env.state().grasped);
  }
  SUBCASE("above the threshold stays open") {
    auto s = s0;
    s.ee = {g.x, g.y, 0.06, 0.0};
    env.set_state(s);
    env.grasp_update();
    CHECK_FALSE(env.state().grasped);
  }
  SUBCASE("at the grasp point closes and the tool follows rigidly") {
    auto s = s0;
    s.ee = {g.x, g.y, 0.03, 0.0};
    env.set_state(s);
    env.grasp_update();
    REQUIRE(env.state().grasped);
    const auto before = env.state();
    const Vec2 grasp_before = env.grasp_point_world();
    env.step(std::vector<double>{0.1, -0.05, 0.1, 0.0});
    const auto after = env.state();
    const double dx = after.ee[0] - before.ee[0], dy = after.ee[1] - before.ee[1];
    const double dz = after.ee[2] - before.ee[2];
    CHECK(dx == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(after.tool.x - before.tool.x == doctest::Approx(dx).epsilon(1e-9));
    CHECK(after.tool.y - before.tool.y == doctest::Approx(dy).epsilon(1e-9));
    CHECK(after.tool_z - before.tool_z == doctest::Approx(dz).epsilon(1e-9));
    CHECK(after.tool.yaw == before.tool.yaw);
    const Vec2 grasp_after = env.grasp_point_world();
    CHECK((grasp_after - grasp_before).norm() == doctest::Approx(std::hypot(dx, dy)));
  }
  SUBCASE("rotation carries the tool about the end-effector") {
    auto s = s0;
    s.ee = {g.x, g.y, 0.03, 0.0};
    env.set_state(s);
    env.grasp_update();
    const double yaw0 = env.state().tool.yaw;
    const Vec2 ee0{env.state().ee[0], env.state().ee[1]};
    const double r0 = (env.grasp_point_world() - ee0).norm();
    env.step(std::vector<double>{0.0, 0.0, 0.0, 0.5});
    CHECK(wrap_angle(env.state().tool.yaw - yaw0) == doctest::Approx(0.1));
    CHECK((env.grasp_point_world() - ee0).norm() == doctest::Approx(r0).epsilon(1e-9));
  }
}

TEST_CASE("grasp only within the radius of the grasp point") {
  // Brute-force point-in-disc oracle over a lattice covering the tool.
  for (int tid : {0, 5, 13, 22, 35}) {
    const auto& tool = catalog()[tid];
    TaskEnv env(Task::hammering);
    env.reset(tool, 2);
    const auto s0 = env.state();
    const Vec2 g = env.grasp_point_world();
    const Vec2 head = env.head_center_world();
    int grasps = 0, lattice = 0;
    for (int i = -20; i <= 20; ++i)
      for (int j = -20; j <= 20; ++j) {
        const Vec2 p = g + Vec2{i * 0.0071, j * 0.0071};
        auto s = s0;
        s.ee = {p.x, p.y, 0.02, 0.0};
        env.set_state(s);
        env.grasp_update();
        const double dx = p.x - g.x, dy = p.y - g.y;
        const bool expect = dx * dx + dy * dy < 0.04 * 0.04;
        CHECK(env.state().grasped == expect);
        grasps += expect;
        ++lattice;
      }
    CHECK(grasps > 0);
    CHECK(grasps < lattice);
    // Hovering over the head only grasps if the head happens to be in range.
    auto s = s0;
    s.ee = {head.x, head.y, 0.02, 0.0};
    env.set_state(s);
    env.grasp_update();
    CHECK(env.state().grasped == ((head - g).norm() < 0.04));
  }
}

TEST_CASE("pushing contact moves the tool away from the end-effector") {
  TaskEnv env(Task::pushing);
  env.reset(catalog()[0], 0);
  const Vec2 c0 = env.tool_centroid_world();
  const auto& c = env.config();
  std::vector<double> fwd = {c.action_high[0], 0.0, 0.0};
  for (int i = 0; i < 12; ++i) {
    auto s = env.state();
    // Steer toward the tool centroid.
    const Vec2 d = env.tool_centroid_world() - Vec2{s.ee[0], s.ee[1]};
    fwd[1] = std::clamp(d.y, -0.1, 0.1);
    env.step(fwd);
  }
  CHECK(env.tool_centroid_world().x > c0.x + 0.01);
  CHECK_FALSE(env.state().grasped);
  const Vec2 ee{env.state().ee[0], env.state().ee[1]};
  for (const auto& b : env.tool_boxes_world())
    CHECK_FALSE(disc_box_contact(Disc{ee, c.ee_radius - 1e-9}, b).has_value());
}

TEST_CASE("hammering: strikes drive the nail, pressing does not") {
  TaskEnv env(Task::hammering);
  env.reset(catalog()[0], 4);
  auto s = env.state();
  s.grasped = true;
  s.tool_z = 0.04 + env.nail_top_height();
  s.grasp_z_offset = 0.01;
  env.set_state(s);
  const Vec2 h = env.head_center_world();
  s.tool.x += s.object.x - h.x;
  s.tool.y += s.object.y - h.y;
  const Vec2 g = s.tool.apply(env.tool().grasp_point());
  s.ee = {g.x, g.y, s.tool_z + s.grasp_z_offset, 0.0};
  env.set_state(s);

  const std::vector<double> down = {0, 0, -0.2, 0}, up = {0, 0, 0.2, 0};
  env.step(down);
  const double first = env.state().nail_depth;
  // kappa * (0.2 - 0.12) = 0.008
  CHECK(first == doctest::Approx(0.008).epsilon(1e-9));
  env.step(down);
  env.step(down);
  CHECK(env.state().nail_depth == doctest::Approx(first).epsilon(1e-9));
  for (int i = 0; i < 4; ++i) {
    env.step(up);
    env.step(down);
  }
  CHECK(env.state().nail_depth == doctest::Approx(env.config().nail_exposed));
}

TEST_CASE("sweeping: the tool pushes the cylinder only when low") {
  TaskEnv env(Task::sweeping);
  env.reset(catalog()[0], 4);
  auto s = env.state();
  s.grasped = true;
  s.grasp_z_offset = 0.01;
  // Head long axis along world x, handle trailing toward -y.
  s.tool.yaw = std::numbers::pi / 2 - env.tool().head_angle;
  env.set_state(s);
  auto place = [&](double z) {
    auto st = s;
    st.tool_z = z;
    st.ee[2] = z + 0.01;
    env.set_state(s);
    const Vec2 h = env.head_center_world();
    const double gap = env.tool().head_width / 2 + env.config().cylinder_radius + 0.01;
    const Vec2 want = s.object - Vec2{0.0, gap};
    st.tool.x += want.x - h.x;
    st.tool.y += want.y - h.y;
    const Vec2 g = st.tool.apply(env.tool().grasp_point());
    st.ee[0] = g.x;
    st.ee[1] = g.y;
    env.set_state(st);
  };
  place(0.1);
  for (int i = 0; i < 3; ++i) env.step(std::vector<double>{0, 0.2, 0, 0});
  CHECK(env.state().object == s.object);
  place(0.01);
  for (int i = 0; i < 3; ++i) env.step(std::vector<double>{0, 0.2, 0, 0});
  CHECK(env.state().object.y > s.object.y + 0.05);
  CHECK(std::abs(env.state().object.x - s.object.x) < 1e-9);
}

TEST_CASE("render: empty scene and determinism") {
  for (std::size_t side : {32u, 128u}) {
    const auto g = render_grid(Scene{}, View::overhead, side);
    CHECK(g.size() == side * side * 3);
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
  }
  CHECK_THROWS_AS(render_grid(Scene{}, View::overhead, 64), Error);
  TaskEnv env(Task::sweeping, ObservationMode::grid, 32);
  const auto o1 = env.reset(catalog()[9], 3);
  TaskEnv env2(Task::sweeping, ObservationMode::grid, 32);
  const auto o2 = env2.reset(catalog()[9], 3);
  CHECK(o1 == o2);
  CHECK(o1.size() == env.observation_size());
  CHECK(o1.size() == 2 * 32 * 32 * 3);
  CHECK(std::count(o1.begin(), o1.end(), 1.0) > 0);
}

TEST_CASE("render: one-cell shift equivariance") {
  const std::size_t side = 32;
  const double pitch = kOverheadExtent / side;
  for (int k = 0; k < 5; ++k) {
    const double ox = -0.15 + (10 + k + 0.3) * pitch, oy = -0.40 + (12 + 0.3) * pitch;
    Box b{{ox + 0.05, oy + 0.02}, 0.0, 0.05 + 0.06 * k * pitch, 0.02};
    Scene a, s;
    a.tool.push_back(b);
    b.center.x += pitch;
    s.tool.push_back(b);
    const auto ga = render_grid(a, View::overhead, side);
    const auto gs = render_grid(s, View::overhead, side);
    int mismatches = 0, filled = 0;
    for (std::size_t r = 0; r + 1 < side; ++r)
      for (std::size_t c = 0; c < side; ++c) {
        const double va = ga[(r * side + c) * 3], vs = gs[((r + 1) * side + c) * 3];
        mismatches += va != vs;
        filled += va > 0;
      }
    CHECK(mismatches == 0);
    CHECK(filled > 0);
  }
}

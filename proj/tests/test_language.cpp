#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "toolmeta/envs/tool_catalog.hpp"
#include "toolmeta/errors.hpp"
#include "toolmeta/language/corpus.hpp"
#include "toolmeta/language/embedding.hpp"
#include "toolmeta/language/pca.hpp"

using namespace toolmeta;
using namespace toolmeta::lang;

namespace {

const std::vector<envs::ToolSpec>& catalog() {
  static const auto c = envs::generate_catalog(7);
  return c;
}

const DescriptionCorpus& corpus() {
  static const auto c = generate_template_corpus(catalog(), 3);
  return c;
}

}  // namespace

TEST_CASE("corpus: four banks of ten paragraphs, reproducible") {
  const auto again = generate_template_corpus(catalog(), 3);
  CHECK(again == corpus());
  CHECK_FALSE(generate_template_corpus(catalog(), 4) == corpus());
  CHECK(corpus().banks.size() == 36);
  for (const auto& [id, banks] : corpus().banks)
    for (const auto& bank : banks) {
      CHECK(bank.size() == 10);
      CHECK(std::set<std::string>(bank.begin(), bank.end()).size() == 10);
    }
}

TEST_CASE("corpus: handle-end grasp is written into shape and geometry paragraphs") {
  int handle_end_tools = 0;
  for (const auto& t : catalog()) {
    const bool near_end = t.grasp_offset < 0.3 * t.handle_length;
    handle_end_tools += near_end;
    const auto& banks = corpus().at(t.id);
    for (Feature f : {Feature::shape, Feature::geometry})
      for (const auto& p : banks[static_cast<std::size_t>(f)]) {
        CAPTURE(p);
        CHECK((p.find("end of the handle") != std::string::npos) == near_end);
      }
  }
  CHECK(handle_end_tools > 0);
  CHECK(handle_end_tools < 36);
}

TEST_CASE("combine: 800 descriptions with full banks, 8 with singleton banks") {
  const auto all = combine_descriptions(corpus(), 0);
  CHECK(all.size() == 800);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 800);
  const auto& b = corpus().at(0);
  const std::set<std::string> shape(b[0].begin(), b[0].end()), geom(b[1].begin(), b[1].end());
  std::size_t with_shape = 0;
  for (const auto& d : all) {
    bool has_shape = false, has_geom = false;
    for (const auto& p : shape) has_shape |= d.find(p) != std::string::npos;
    for (const auto& p : geom) has_geom |= d.find(p) != std::string::npos;
    CHECK(has_shape != has_geom);  // exactly one of the two, never both
    with_shape += has_shape;
  }
  CHECK(with_shape == 400);
  for (std::size_t k = 0; k < all.size(); k += 37) CHECK(combined_description(b, k) == all[k]);

  DescriptionCorpus tiny;
  FeatureBanks one;
  for (auto& bank : one) bank = {"p" + std::to_string(&bank - one.data())};
  tiny.banks[5] = one;
  CHECK(combine_descriptions(tiny, 5).size() == 8);
  tiny.banks[5][3].clear();
  CHECK_THROWS_AS(combine_descriptions(tiny, 5), Error);
}

TEST_CASE("corpus file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "toolmeta_corpus.tsv";
  write_corpus(path, corpus());
  CHECK(read_corpus(path) == corpus());
  std::filesystem::remove(path);
}

TEST_CASE("hash_embed: unit norm, pure, rejects empty text") {
  for (std::size_t d : {128u, 768u}) {
    const auto a = hash_embed("A long handle, with a hooked head!", d);
    const auto b = hash_embed("A long handle, with a hooked head!", d);
    CHECK(a == b);
    CHECK(a.size() == d);
    double n = 0;
    for (double x : a) n += x * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
  }
  // Case and punctuation are stripped before hashing.
  CHECK(hash_embed("Hook, HEAD.", 64) == hash_embed("hook head", 64));
  CHECK(hash_embed("hook head", 64) != hash_embed("head hook", 64));
  CHECK_THROWS_AS(hash_embed("   ", 64), Error);
  CHECK_THROWS_AS(hash_embed("?!", 64), Error);
}

TEST_CASE("hash_embed: same-tool descriptions are closer than cross-tool ones") {
  // Brute-force all pairs over a fixed subsample of each tool's 800 texts.
  constexpr std::size_t kPerTool = 24;
  std::vector<std::vector<std::vector<double>>> emb;
  for (const auto& t : catalog()) {
    const auto all = combine_descriptions(corpus(), t.id);
    std::vector<std::vector<double>> v;
    for (std::size_t k = 0; k < kPerTool; ++k) v.push_back(hash_embed(all[k * 33], 768));
    emb.push_back(std::move(v));
  }
  double same = 0, cross = 0;
  std::size_t ns = 0, nc = 0;
  for (std::size_t a = 0; a < emb.size(); ++a)
    for (std::size_t b = a; b < emb.size(); ++b)
      for (std::size_t i = 0; i < kPerTool; ++i)
        for (std::size_t j = 0; j < kPerTool; ++j) {
          if (a == b && i >= j) continue;
          const double c = cosine(emb[a][i], emb[b][j]);
          if (a == b) {
            same += c;
            ++ns;
          } else {
            cross += c;
            ++nc;
          }
        }
  const double margin = same / ns - cross / nc;
  MESSAGE("same-tool cosine " << same / ns << ", cross-tool " << cross / nc);
  CHECK(margin > 0.0);
}

TEST_CASE("embedding file: bit-exact round trip and diagnostics") {
  const auto path = std::filesystem::temp_directory_path() / "toolmeta_emb.tsv";
  LanguageSource src(corpus(), 16);
  EmbeddingTable table;
  for (int id : {0, 1})
    for (std::size_t k = 0; k < 5; ++k) {
      auto v = *src.get(id, k);
      v.source = ContextSource::file;
      table[id].push_back(v);
    }
  write_embedding_file(path, table);
  CHECK(load_embedding_file(path) == table);
  CHECK_THROWS_AS(load_embedding_file(path, std::set<int>{0}), FormatError);
  try {
    load_embedding_file(path, std::set<int>{0});
  } catch (const FormatError& e) {
    CHECK(e.record() == 8);  // first record of tool 1
  }
  {
    std::ofstream os(path, std::ios::app);
    os << "0\t9\t0.5\t0.5\n";
  }
  try {
    load_embedding_file(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.record() == 13);
  }

  const LanguageSource from_file(table);
  CHECK(from_file.source() == ContextSource::file);
  CHECK(from_file.d_lang() == 16);
  std::filesystem::remove(path);
}

TEST_CASE("missing optional embedding file falls back to hashing") {
  const auto missing = std::filesystem::temp_directory_path() / "toolmeta_no_such_file.tsv";
  std::filesystem::remove(missing);
  const auto src = LanguageSource::create(corpus(), 128, missing);
  CHECK(src.source() == ContextSource::hashed);
  CHECK(src.d_lang() == 128);
  CHECK(src.description_count(3) == 800);
  const auto none = LanguageSource::create(corpus(), 128, std::nullopt);
  CHECK(none.source() == ContextSource::hashed);
}

TEST_CASE("sample_description: uniform, reproducible, singletons") {
  const LanguageSource src(corpus(), 32);
  std::mt19937_64 a(11), b(11);
  for (int i = 0; i < 50; ++i) CHECK(*src.sample(2, a) == *src.sample(2, b));

  // Chi-square against uniform over 800 cells with 80 000 draws.
  constexpr int kDraws = 80000, kCells = 800;
  std::vector<int> counts(kCells, 0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < kDraws; ++i) ++counts[src.sample(4, rng)->description_index];
  const double expected = static_cast<double>(kDraws) / kCells;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // chi2 with 799 dof: mean 799, sd sqrt(2*799) ~ 40.
  const double dof = kCells - 1;
  CHECK(std::abs(chi2 - dof) < 3 * std::sqrt(2 * dof));
  for (int c : counts) CHECK(std::abs(c - expected) < 5 * std::sqrt(expected));

  EmbeddingTable single;
  single[0].push_back(ContextVector{{1.0, 0.0}, ContextSource::file, 0, 0});
  const LanguageSource one(single);
  for (int i = 0; i < 10; ++i) CHECK(one.sample(0, rng)->description_index == 0);
  CHECK_THROWS_AS(one.sample(9, rng), Error);
}

TEST_CASE("pca: exact on a 2-d subspace") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd basis(2, 10);
  for (int i = 0; i < basis.size(); ++i) basis.data()[i] = g(rng);
  Eigen::MatrixXd coeff(200, 2);
  for (int i = 0; i < coeff.size(); ++i) coeff.data()[i] = g(rng);
  Eigen::MatrixXd x = coeff * basis;
  x.rowwise() += Eigen::RowVectorXd::LinSpaced(10, -1, 1);
  const auto r = pca_project(x, 2);
  CHECK((r.reconstruct() - x).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.explained_ratio[0] >= r.explained_ratio[1]);
  CHECK(std::abs(r.explained_ratio[0] + r.explained_ratio[1] - 1.0) < 1e-9);
  const auto t = pca_project(x, 5);
  CHECK(t.rank_truncated);
  CHECK(t.components.cols() == 2);
}

TEST_CASE("pca: ratios nonincreasing on corpus embeddings") {
  const LanguageSource src(corpus(), 768);
  Eigen::MatrixXd x(36 * 8, 768);
  for (int id = 0; id < 36; ++id)
    for (int k = 0; k < 8; ++k) {
      const auto v = src.get(id, static_cast<std::size_t>(k * 97));
      for (int j = 0; j < 768; ++j) x(id * 8 + k, j) = v->values[static_cast<std::size_t>(j)];
    }
  const auto r = pca_project(x, 50);
  double sum = 0;
  for (std::size_t i = 0; i < r.explained_ratio.size(); ++i) {
    sum += r.explained_ratio[i];
    if (i > 0) CHECK(r.explained_ratio[i] <= r.explained_ratio[i - 1]);
  }
  CHECK(sum <= 1.0 + 1e-12);
}

TEST_CASE("pca: isotropic Gaussian gives ratios near 1/d") {
  // Sample-covariance eigenvalues of N(0, I) lie within the Marchenko-Pastur
  // support [(1 - sqrt(d/n))^2, (1 + sqrt(d/n))^2] up to finite-size noise.
  constexpr int n = 10000, d = 20;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const auto r = pca_project(x, d);
  const double q = std::sqrt(static_cast<double>(d) / n);
  const double lo = (1 - q) * (1 - q) * 0.97, hi = (1 + q) * (1 + q) * 1.03;
  for (double ratio : r.explained_ratio) {
    CHECK(ratio * d > lo);
    CHECK(ratio * d < hi);
  }
}

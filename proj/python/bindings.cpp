// Python bindings for the main hyex operations.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "hyex/align.hpp"
#include "hyex/core.hpp"
#include "hyex/embed.hpp"
#include "hyex/error.hpp"
#include "hyex/evalx.hpp"
#include "hyex/generate.hpp"
#include "hyex/index.hpp"
#include "hyex/retrieve.hpp"
#include "hyex/tatoeba.hpp"

namespace py = pybind11;
using namespace hyex;

namespace {

std::vector<ScoredPair> to_pairs(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw Error(ErrorCode::InvalidArgument, "labels and scores differ in length");
  std::vector<ScoredPair> pairs;
  pairs.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pairs.push_back({"", static_cast<ExerciseId>(i), scores[i], labels[i]});
  }
  return pairs;
}

ProjectionHead make_head(const Eigen::MatrixXd& w_l1, const std::optional<Eigen::MatrixXd>& w_l2) {
  ProjectionHead head;
  head.w_l1 = w_l1;
  head.tied = !w_l2.has_value();
  if (w_l2) head.w_l2 = *w_l2;
  head.validate();
  return head;
}

/// Owns everything a mock-provider retrieval needs.
class MockPipeline {
 public:
  MockPipeline(const Corpus& corpus, std::vector<MockRule> rules, Side side, std::size_t dim)
      : embedder_(dim), generator_(std::move(rules)), index_(build_index(embed_corpus(corpus, side, embedder_))) {}

  RetrievalResult retrieve(const std::string& text, int k, int k_h, bool direct) {
    RetrieveConfig config{k, k_h, index_.spec().side, false};
    const RetrievalContext ctx{index_, embedder_, &generator_, nullptr, GenConfig{}};
    const Query query{"q", text, "l1"};
    return direct ? retrieve_direct(query, ctx, config) : retrieve_mhyer(query, ctx, config);
  }

  EvalReport eval_tags(const TagBenchmark& bench, int k, bool direct) {
    RetrieveConfig config{k, kDefaultCandidateCount, index_.spec().side, false};
    const RetrievalContext ctx{index_, embedder_, &generator_, nullptr, GenConfig{}};
    const Scorer scorer = direct ? make_direct_scorer(ctx, config) : make_mhyer_scorer(ctx, config);
    return hyex::eval_tags(bench, index_, scorer, k);
  }

  const VectorIndex& index() const { return index_; }

 private:
  MockEmbedder embedder_;
  MockGenerator generator_;
  VectorIndex index_;
};

}  // namespace

PYBIND11_MODULE(_hyex, m) {
  m.doc() = "Zero-shot exercise retrieval with hypothetical exercises";
  spdlog::set_default_logger(spdlog::stderr_logger_mt("hyex"));

  py::register_exception<Error>(m, "HyexError", PyExc_RuntimeError);

  py::enum_<Side>(m, "Side").value("L1", Side::L1).value("L2", Side::L2);

  py::class_<Exercise>(m, "Exercise")
      .def(py::init<ExerciseId, std::string, std::string, std::optional<std::string>>(), py::arg("id"),
           py::arg("l1"), py::arg("l2"), py::arg("course") = std::nullopt)
      .def_readonly("id", &Exercise::id)
      .def_readonly("l1", &Exercise::l1_text)
      .def_readonly("l2", &Exercise::l2_text)
      .def_readonly("course", &Exercise::course);

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<std::vector<Exercise>>())
      .def("__len__", &Corpus::size)
      .def("__getitem__", [](const Corpus& c, ExerciseId id) { return c.at(id); })
      .def("__contains__", &Corpus::contains)
      .def_property_readonly("exercises", &Corpus::exercises);
  m.def("load_corpus", &load_corpus);
  m.def("save_corpus", &save_corpus);

  py::class_<TagEntry>(m, "TagEntry")
      .def(py::init<std::string, std::string, std::vector<ExerciseId>>())
      .def_readonly("tag_id", &TagEntry::tag_id)
      .def_readonly("tag_text", &TagEntry::tag_text)
      .def_readonly("relevant_ids", &TagEntry::relevant_ids);
  py::class_<TagBenchmark>(m, "TagBenchmark")
      .def(py::init([](std::vector<TagEntry> tags) { return TagBenchmark{std::move(tags)}; }))
      .def_readonly("tags", &TagBenchmark::tags);
  m.def("load_tag_benchmark", [](const std::filesystem::path& p) { return load_tag_benchmark(p); });

  m.def("fnv1a64", &fnv1a64);
  m.def("tokenize", &tokenize);
  m.def("mock_embed", &mock_embed, py::arg("text"), py::arg("dim"));
  m.def("cosine_sim", [](const Vector& a, const Vector& b) { return cosine_sim(a, b); });

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def_property_readonly("dim", &EmbeddingStore::dim)
      .def_property_readonly("provider", [](const EmbeddingStore& s) { return s.spec().provider; })
      .def_property_readonly("side", [](const EmbeddingStore& s) { return s.spec().side; })
      .def_property_readonly("projection_id", [](const EmbeddingStore& s) { return s.spec().projection_id; })
      .def_property_readonly("ids", &EmbeddingStore::ids)
      .def_property_readonly("vectors", &EmbeddingStore::vectors)
      .def("__len__", &EmbeddingStore::size)
      .def("__getitem__", &EmbeddingStore::at);
  m.def("embed_corpus_mock",
        [](const Corpus& corpus, Side side, std::size_t dim) {
          MockEmbedder embedder(dim);
          return embed_corpus(corpus, side, embedder);
        },
        py::arg("corpus"), py::arg("side"), py::arg("dim") = 64);
  m.def("load_store", &load_store);
  m.def("save_store", &save_store, py::arg("store"), py::arg("path"), py::arg("append") = false);

  m.def("infonce_loss",
        [](const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2, const Eigen::MatrixXd& w_l1,
           const std::optional<Eigen::MatrixXd>& w_l2, double tau) {
          const LossResult r = infonce_loss({l1, l2}, make_head(w_l1, w_l2), tau);
          return py::make_tuple(r.loss, r.similarity);
        },
        py::arg("l1"), py::arg("l2"), py::arg("w_l1"), py::arg("w_l2") = std::nullopt,
        py::arg("tau") = kDefaultTemperature);
  m.def("infonce_grad",
        [](const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2, const Eigen::MatrixXd& w_l1,
           const std::optional<Eigen::MatrixXd>& w_l2, double tau) {
          const HeadGradient g = infonce_grad({l1, l2}, make_head(w_l1, w_l2), tau);
          return py::make_tuple(g.w_l1, w_l2 ? py::cast(g.w_l2) : py::none());
        },
        py::arg("l1"), py::arg("l2"), py::arg("w_l1"), py::arg("w_l2") = std::nullopt,
        py::arg("tau") = kDefaultTemperature);

  py::class_<ProjectionHead>(m, "ProjectionHead")
      .def_readonly("w_l1", &ProjectionHead::w_l1)
      .def_property_readonly("w_l2", [](const ProjectionHead& h) { return h.weights(Side::L2); })
      .def_readonly("tied", &ProjectionHead::tied)
      .def_readonly("tau", &ProjectionHead::tau)
      .def_property_readonly("projection_id", &ProjectionHead::projection_id)
      .def("project", [](const ProjectionHead& h, Side side, const Vector& v) { return project(h, side, v); });
  m.def("save_head", &save_head);
  m.def("load_head", &load_head);
  m.def("apply_head", &apply_head);

  m.def("train",
        [](const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2, double tau, std::size_t batch_size, int epochs,
           double learning_rate, const std::string& optimizer, std::uint64_t seed, double init_noise, bool tied) {
          TrainConfig c;
          c.tau = tau;
          c.batch_size = batch_size;
          c.epochs = epochs;
          c.learning_rate = learning_rate;
          if (optimizer != "adam" && optimizer != "gd") throw Error(ErrorCode::InvalidArgument, "optimizer: adam or gd");
          c.optimizer = optimizer == "gd" ? Optimizer::GradientDescent : Optimizer::Adam;
          c.seed = seed;
          c.init_noise = init_noise;
          c.tied = tied;
          const TrainResult r = train(PairBatch{l1, l2}, c);
          return py::make_tuple(r.head, r.loss_trace);
        },
        py::arg("l1"), py::arg("l2"), py::arg("tau") = kDefaultTemperature, py::arg("batch_size") = 64,
        py::arg("epochs") = 10, py::arg("learning_rate") = 1e-3, py::arg("optimizer") = "adam",
        py::arg("seed") = 42, py::arg("init_noise") = 0.01, py::arg("tied") = true);

  py::class_<VectorIndex>(m, "VectorIndex")
      .def("__len__", &VectorIndex::size)
      .def_property_readonly("ids", &VectorIndex::ids)
      .def_property_readonly("dim", &VectorIndex::dim);
  m.def("build_index", &build_index);
  auto scored = [](const std::vector<ScoredId>& ranked) {
    std::vector<std::pair<ExerciseId, double>> out;
    for (const auto& s : ranked) out.emplace_back(s.id, s.score);
    return out;
  };
  m.def("search", [scored](const VectorIndex& index, const Vector& q, std::size_t k) {
    return scored(search(index, q, k));
  });
  m.def("score_all", [](const VectorIndex& index, const Vector& q) { return score_all(index, q); });
  m.def("average_embeddings", [](const std::vector<Vector>& v) { return average_embeddings(v); });

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("k_h", &GenConfig::k_h)
      .def_readwrite("side", &GenConfig::side)
      .def_readwrite("l1_name", &GenConfig::l1_name)
      .def_readwrite("l2_name", &GenConfig::l2_name)
      .def_readwrite("distribution_description", &GenConfig::distribution_description)
      .def_readwrite("model", &GenConfig::model)
      .def_readwrite("temperature", &GenConfig::temperature)
      .def_readwrite("max_retries", &GenConfig::max_retries);
  m.def("build_prompt", [](const GenConfig& c, const std::string& text) {
    const Prompt p = build_prompt(c, Query{"q", text, "l1"});
    return py::make_tuple(p.system_text, p.user_text);
  });
  m.def("parse_candidates", &parse_candidates, py::arg("content"), py::arg("k_h"));
  py::class_<MockRule>(m, "MockRule")
      .def(py::init<std::string, std::optional<Side>, std::vector<std::string>>(), py::arg("pattern"),
           py::arg("side"), py::arg("pool"))
      .def_readonly("pattern", &MockRule::pattern)
      .def_readonly("side", &MockRule::side)
      .def_readonly("pool", &MockRule::pool);
  m.def("load_mock_rules", &load_mock_rules);
  m.def("mock_generate", [](const std::vector<MockRule>& rules, const std::string& text, int k_h, Side side) {
    return mock_generate(rules, Query{"q", text, "l1"}, k_h, side).candidates;
  });

  py::class_<RetrievalResult>(m, "RetrievalResult")
      .def_property_readonly("query", [](const RetrievalResult& r) { return r.query.text; })
      .def_readonly("side", &RetrievalResult::side)
      .def_property_readonly("candidates",
                             [](const RetrievalResult& r) -> std::optional<std::vector<std::string>> {
                               if (!r.candidates) return std::nullopt;
                               return r.candidates->candidates;
                             })
      .def_property_readonly("ranked", [scored](const RetrievalResult& r) { return scored(r.ranked); })
      .def_readonly("query_vector", &RetrievalResult::query_vector)
      .def("to_json", [](const RetrievalResult& r) { return result_to_json(r); });

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("auc", &EvalReport::auc)
      .def_readonly("best_accuracy", &EvalReport::best_accuracy)
      .def_readonly("best_threshold", &EvalReport::best_threshold)
      .def_readonly("precision_at_k", &EvalReport::precision_at_k)
      .def_readonly("k", &EvalReport::k)
      .def_readonly("n_pairs", &EvalReport::n_pairs)
      .def_readonly("n_queries", &EvalReport::n_queries)
      .def("to_json", [](const EvalReport& r) { return report_to_json(r); });

  py::class_<MockPipeline>(m, "MockPipeline")
      .def(py::init<const Corpus&, std::vector<MockRule>, Side, std::size_t>(), py::arg("corpus"),
           py::arg("rules"), py::arg("side") = Side::L2, py::arg("dim") = 512)
      .def("retrieve", &MockPipeline::retrieve, py::arg("query"), py::arg("k") = kDefaultTopK,
           py::arg("k_h") = kDefaultCandidateCount, py::arg("direct") = false)
      .def("eval_tags", &MockPipeline::eval_tags, py::arg("bench"), py::arg("k") = kDefaultTopK,
           py::arg("direct") = false)
      .def_property_readonly("index", &MockPipeline::index, py::return_value_policy::reference_internal);

  m.def("auc", [](const std::vector<int>& labels, const std::vector<double>& scores) {
    return auc(to_pairs(labels, scores));
  });
  m.def("accuracy_sweep", [](const std::vector<int>& labels, const std::vector<double>& scores) {
    const SweepResult r = accuracy_sweep(to_pairs(labels, scores));
    return py::make_tuple(r.best_accuracy, r.best_threshold);
  });
  m.def("precision_at_k",
        [](const std::vector<ExerciseId>& ranked, const std::vector<ExerciseId>& relevant, std::size_t k) {
          return precision_at_k(ranked, {relevant.begin(), relevant.end()}, k);
        },
        py::arg("ranked"), py::arg("relevant"), py::arg("k") = kDefaultTopK);
  m.def("tier_sample", [](const std::vector<ExerciseId>& ranking, std::uint64_t seed) {
    const TierSample s = tier_sample(ranking, seed);
    return py::make_tuple(s.tier1, s.tier2, s.tier3);
  });
  m.def("char_count", &char_count);
  m.def("pca_project",
        [](const std::vector<Vector>& vectors, const std::vector<std::string>& groups, std::size_t out_dim) {
          std::vector<std::pair<std::string, Vector>> out;
          for (auto& p : pca_project(vectors, groups, out_dim).points) out.emplace_back(p.group, p.coords);
          return out;
        },
        py::arg("vectors"), py::arg("groups"), py::arg("out_dim") = 2);

  m.def("build_tatoeba",
        [](const std::filesystem::path& sentences, const std::filesystem::path& links,
           const std::filesystem::path& tags, const std::filesystem::path& config,
           const std::filesystem::path& out_dir) {
          const auto output =
              tatoeba::build_benchmark(sentences, links, tags, tatoeba::load_build_config(config));
          tatoeba::write_build(output, out_dir);
          return tatoeba::report_to_json(output.report);
        },
        py::arg("sentences"), py::arg("links"), py::arg("tags"), py::arg("config"), py::arg("out_dir"));

  m.attr("DEFAULT_K") = kDefaultTopK;
  m.attr("DEFAULT_K_H") = kDefaultCandidateCount;
  m.attr("DEFAULT_TAU") = kDefaultTemperature;
}

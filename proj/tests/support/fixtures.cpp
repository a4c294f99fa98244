#include "fixtures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "hyex/embed.hpp"

namespace hyex::testing {

const std::vector<PlantedTopic>& planted_topics() {
  static const std::vector<PlantedTopic> topics = {
      {"past tense", {"comí", "bebí", "hablé", "caminé", "escribió", "vivieron", "estudiamos", "compraste",
                      "llegaron", "trabajé", "durmió", "viajamos"}},
      {"animals", {"gato", "perro", "caballo", "vaca", "pájaro", "tortuga", "conejo", "elefante", "ratón",
                   "serpiente", "oveja", "mariposa"}},
      {"food", {"pan", "queso", "manzana", "arroz", "sopa", "tomate", "pescado", "naranja", "galleta",
                "mantequilla", "cebolla", "ensalada"}},
      {"weather", {"lluvia", "nieve", "viento", "nublado", "tormenta", "calor", "frío", "sol", "relámpago",
                   "granizo", "neblina", "huracán"}},
      {"family", {"madre", "padre", "hermano", "abuela", "tío", "prima", "sobrino", "esposa", "hijo", "nieta",
                  "suegro", "cuñada"}},
      {"travel", {"avión", "maleta", "pasaporte", "hotel", "aeropuerto", "billete", "estación", "tren",
                  "frontera", "equipaje", "mapa", "turista"}},
      {"colors", {"rojo", "azul", "verde", "amarillo", "morado", "anaranjado", "blanco", "negro", "gris",
                  "rosado", "marrón", "celeste"}},
      {"numbers", {"uno", "dos", "tres", "cuatro", "cinco", "seis", "siete", "ocho", "nueve", "diez", "veinte",
                   "cien"}},
      {"body parts", {"cabeza", "brazo", "pierna", "rodilla", "hombro", "codo", "dedo", "oreja", "nariz", "boca",
                      "espalda", "tobillo"}},
      {"school", {"lápiz", "cuaderno", "pizarra", "maestro", "alumno", "examen", "tarea", "mochila", "recreo",
                  "biblioteca", "regla", "borrador"}},
  };
  return topics;
}

namespace {

std::string sentence_from(const std::vector<std::string>& words, std::mt19937_64& rng) {
  std::vector<std::string> pick(words);
  std::shuffle(pick.begin(), pick.end(), rng);
  std::string s;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) s += ' ';
    s += pick[i];
  }
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}

std::string capitalized(std::string s) {
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

PlantedFixture make_planted_fixture(const PlantedOptions& options) {
  const auto& topics = planted_topics();
  const std::size_t n_topics = topics.size();
  std::mt19937_64 rng(options.seed);

  PlantedFixture fx;
  fx.topic_ids.resize(n_topics);
  std::vector<Exercise> exercises;
  std::set<std::string> used;
  for (std::size_t row = 0; row < options.sentences_per_topic; ++row) {
    for (std::size_t t = 0; t < n_topics; ++t) {
      std::string text;
      do {
        text = sentence_from(topics[t].words, rng);
      } while (!used.insert(text).second);
      const auto id = static_cast<ExerciseId>(row * n_topics + t);
      exercises.push_back(Exercise{id, "Practice sentence about " + topics[t].query + ".", text, "en-es"});
      fx.topic_ids[t].push_back(id);
    }
  }

  if (options.short_decoys) {
    ExerciseId next = static_cast<ExerciseId>(options.sentences_per_topic * n_topics);
    for (const auto& topic : topics) {
      const auto tokens = tokenize(topic.query);
      std::vector<std::string> decoys{capitalized(topic.query) + ".", capitalized(tokens.front()) + "!",
                                      capitalized(tokens.back()) + "?"};
      if (tokens.size() == 1) decoys = {capitalized(topic.query) + ".", capitalized(topic.query) + "!",
                                        capitalized(topic.query) + "?"};
      for (auto& d : decoys) {
        exercises.push_back(Exercise{next, d, d, "en-es"});
        fx.decoy_ids.push_back(next++);
      }
    }
  }
  fx.corpus = Corpus(std::move(exercises));

  for (std::size_t t = 0; t < n_topics; ++t) {
    char tag_id[32];
    std::snprintf(tag_id, sizeof tag_id, "t%02zu", t + 1);
    fx.bench.tags.push_back(TagEntry{tag_id, topics[t].query, fx.topic_ids[t]});
    fx.queries.push_back(Query{tag_id, topics[t].query, "l1"});

    MockRule rule{topics[t].query, Side::L2, {}};
    std::set<std::string> pool;
    while (rule.pool.size() < options.candidates_per_rule) {
      std::string s = sentence_from(topics[t].words, rng);
      if (!used.count(s) && pool.insert(s).second) rule.pool.push_back(s);
    }
    fx.rules.push_back(std::move(rule));
  }
  return fx;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index dim, std::mt19937_64& rng) {
  const Eigen::MatrixXd g = gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
}

double naive_infonce_loss(const PairBatch& batch, const ProjectionHead& head, double tau) {
  const auto n = batch.l1.rows();
  const Eigen::MatrixXd& w1 = head.w_l1;
  const Eigen::MatrixXd& w2 = head.tied ? head.w_l1 : head.w_l2;
  std::vector<Vector> z1, z2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd a = w1 * batch.l1.row(i).transpose();
    const Eigen::VectorXd b = w2 * batch.l2.row(i).transpose();
    z1.emplace_back(a.data(), a.data() + a.size());
    z2.emplace_back(b.data(), b.data() + b.size());
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      denom += std::exp(cosine_sim(z1[static_cast<std::size_t>(i)], z2[static_cast<std::size_t>(j)]) / tau);
    }
    const double num = std::exp(cosine_sim(z1[static_cast<std::size_t>(i)], z2[static_cast<std::size_t>(i)]) / tau);
    total += -std::log(num / denom);
  }
  return total / static_cast<double>(n);
}

namespace {

void fd_matrix(const PairBatch& batch, ProjectionHead head, double tau, bool second, const Eigen::MatrixXd& analytic,
               double step, FiniteDifferenceCheck& out) {
  Eigen::MatrixXd& w = second ? head.w_l2 : head.w_l1;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      const double original = w(r, c);
      w(r, c) = original + step;
      const double plus = naive_infonce_loss(batch, head, tau);
      w(r, c) = original - step;
      const double minus = naive_infonce_loss(batch, head, tau);
      w(r, c) = original;
      const double fd = (plus - minus) / (2.0 * step);
      const double rel = std::abs(analytic(r, c) - fd) / std::max(1.0, std::abs(fd));
      out.max_relative_error = std::max(out.max_relative_error, rel);
      ++out.entries;
    }
  }
}

}  // namespace

FiniteDifferenceCheck check_gradient_fd(const PairBatch& batch, const ProjectionHead& head, double tau,
                                        const HeadGradient& analytic, double step) {
  FiniteDifferenceCheck out;
  fd_matrix(batch, head, tau, false, analytic.w_l1, step, out);
  if (!head.tied) fd_matrix(batch, head, tau, true, analytic.w_l2, step, out);
  return out;
}

double translation_accuracy(const PairBatch& pairs, const ProjectionHead& head) {
  const auto n = pairs.l1.rows();
  Eigen::MatrixXd u = pairs.l1 * head.weights(Side::L1).transpose();
  Eigen::MatrixXd v = pairs.l2 * head.weights(Side::L2).transpose();
  u.rowwise().normalize();
  v.rowwise().normalize();
  const Eigen::MatrixXd sim = u * v.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    sim.row(i).maxCoeff(&best);
    hits += best == i ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace hyex::testing

#include "taxokit/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"
#include "taxokit/taxonomy_io.hpp"

namespace taxokit::eval {

namespace {

void require_same_concepts(const TaxonomyGraph& predicted, const TaxonomyGraph& truth) {
  std::vector<std::string> a, b;
  for (const Concept& c : predicted.concepts()) a.push_back(c.id);
  for (const Concept& c : truth.concepts()) b.push_back(c.id);
  if (a == b) return;

  std::vector<std::string> only_predicted, only_truth;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(only_predicted));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_truth));
  std::ostringstream msg;
  msg << "concept sets differ for taxonomy '" << truth.id() << "':";
  const std::size_t cap = 20;
  if (!only_predicted.empty()) {
    msg << " only in prediction:";
    for (std::size_t i = 0; i < only_predicted.size() && i < cap; ++i) {
      msg << " '" << only_predicted[i] << "'";
    }
    if (only_predicted.size() > cap) msg << " (+" << only_predicted.size() - cap << ")";
  }
  if (!only_truth.empty()) {
    msg << " only in truth:";
    for (std::size_t i = 0; i < only_truth.size() && i < cap; ++i) {
      msg << " '" << only_truth[i] << "'";
    }
    if (only_truth.size() > cap) msg << " (+" << only_truth.size() - cap << ")";
  }
  throw std::runtime_error(msg.str());
}

double pct(double fraction) { return 100.0 * fraction; }

std::string fixed2(double value) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << value;
  return s.str();
}

}  // namespace

AncestralMetrics ancestral_prf(const TaxonomyGraph& predicted, const TaxonomyGraph& truth) {
  require_same_concepts(predicted, truth);
  const std::vector<Edge> p_hat = ancestral_closure(predicted);
  const std::vector<Edge> t_hat = ancestral_closure(truth);
  std::vector<Edge> common;
  std::set_intersection(p_hat.begin(), p_hat.end(), t_hat.begin(), t_hat.end(),
                        std::back_inserter(common));
  AncestralMetrics m;
  m.precision = p_hat.empty() ? 0.0
                              : static_cast<double>(common.size()) /
                                    static_cast<double>(p_hat.size());
  m.recall = t_hat.empty() ? 0.0
                           : static_cast<double>(common.size()) /
                                 static_cast<double>(t_hat.size());
  m.f1 = (m.precision + m.recall == 0.0)
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

AncestralMetrics macro_average(const std::vector<AncestralMetrics>& per_tax) {
  if (per_tax.empty()) {
    throw std::invalid_argument("macro average over an empty list");
  }
  AncestralMetrics sum;
  for (const AncestralMetrics& m : per_tax) {
    sum.precision += m.precision;
    sum.recall += m.recall;
    sum.f1 += m.f1;
  }
  const double n = static_cast<double>(per_tax.size());
  return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

ConsistencyMetrics consistency_metrics(const std::vector<TaxonomyGraph>& taxonomies) {
  if (taxonomies.empty()) {
    throw std::invalid_argument("consistency metrics over an empty list");
  }
  double roots_sum = 0.0;
  double rootless = 0.0;
  double parents_sum = 0.0;
  double mpn_sum = 0.0;
  for (const TaxonomyGraph& t : taxonomies) {
    const std::vector<int> in = t.in_degrees();
    std::size_t root_count = 0;
    std::size_t multi = 0;
    std::size_t in_sum = 0;
    for (int d : in) {
      if (d == 0) {
        ++root_count;
      } else {
        in_sum += static_cast<std::size_t>(d);
        if (d > 1) ++multi;
      }
    }
    roots_sum += static_cast<double>(root_count);
    if (root_count == 0) rootless += 1.0;
    const std::size_t non_root = t.concept_count() - root_count;
    if (non_root == 0) {
      // all-roots taxonomy: count its parent structure as ideal
      parents_sum += 1.0;
    } else {
      parents_sum += static_cast<double>(in_sum) / static_cast<double>(non_root);
      mpn_sum += pct(static_cast<double>(multi) / static_cast<double>(non_root));
    }
  }
  const double n = static_cast<double>(taxonomies.size());
  return {roots_sum / n, pct(rootless / n), parents_sum / n, mpn_sum / n};
}

std::pair<std::size_t, AncestralMetrics> individual_best(
    const std::vector<TaxonomyGraph>& runs, const TaxonomyGraph& truth) {
  if (runs.empty()) {
    throw std::invalid_argument("individual best over an empty run list");
  }
  std::size_t best = 0;
  AncestralMetrics best_m = ancestral_prf(runs[0], truth);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const AncestralMetrics m = ancestral_prf(runs[i], truth);
    if (m.f1 > best_m.f1) {
      best = i;
      best_m = m;
    }
  }
  return {best, best_m};
}

EvaluationReport evaluate_all(const std::vector<TaxonomyGraph>& predicted,
                              const std::vector<TaxonomyGraph>& truth, int jobs) {
  if (truth.empty()) {
    throw std::invalid_argument("evaluation requires at least one ground-truth taxonomy");
  }
  std::map<std::string, const TaxonomyGraph*> truth_by_id;
  for (const TaxonomyGraph& t : truth) {
    if (!truth_by_id.emplace(t.id(), &t).second) {
      throw std::runtime_error("duplicate ground-truth taxonomy id '" + t.id() + "'");
    }
  }
  std::map<std::string, const TaxonomyGraph*> pred_by_id;
  for (const TaxonomyGraph& p : predicted) {
    if (!pred_by_id.emplace(p.id(), &p).second) {
      throw std::runtime_error("duplicate predicted taxonomy id '" + p.id() + "'");
    }
    if (!truth_by_id.count(p.id())) {
      throw std::runtime_error("prediction for unknown taxonomy '" + p.id() + "'");
    }
  }
  for (const auto& [id, t] : truth_by_id) {
    (void)t;
    if (!pred_by_id.count(id)) {
      throw std::runtime_error("missing prediction for taxonomy '" + id + "'");
    }
  }

  std::vector<std::pair<const TaxonomyGraph*, const TaxonomyGraph*>> pairs;
  for (const auto& [id, t] : truth_by_id) pairs.emplace_back(pred_by_id.at(id), t);

  EvaluationReport report;
  report.per_taxonomy.resize(pairs.size());
  std::vector<std::string> failures(pairs.size());
  const auto score_one = [&](std::size_t i) {
    // exceptions must not escape the worker loop; surfaced after the join
    try {
      const auto& [p, t] = pairs[i];
      report.per_taxonomy[i] =
          PerTaxonomy{t->id(), ancestral_prf(*p, *t), check_consistency(*p)};
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };

#ifdef _OPENMP
  const bool threaded = pairs.size() > 1 && !omp_in_parallel();
#else
  const bool threaded = false;
  (void)jobs;
#endif
  if (threaded) {
#ifdef _OPENMP
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t i = 0; i < pairs.size(); ++i) score_one(i);
#endif
  } else {
    for (std::size_t i = 0; i < pairs.size(); ++i) score_one(i);
  }
  for (const std::string& f : failures) {
    if (!f.empty()) throw std::runtime_error(f);
  }

  std::vector<AncestralMetrics> per;
  std::vector<TaxonomyGraph> preds;
  for (const auto& [p, t] : pairs) {
    (void)t;
    preds.push_back(*p);
  }
  for (const PerTaxonomy& row : report.per_taxonomy) per.push_back(row.ancestral);
  report.macro = macro_average(per);
  report.consistency = consistency_metrics(preds);
  return report;
}

void write_report_text(std::ostream& out, const EvaluationReport& report) {
  out << "taxonomy\tprecision\trecall\tf1\troots\tmulti_parent\tconsistent\n";
  for (const PerTaxonomy& row : report.per_taxonomy) {
    out << row.taxonomy_id << '\t' << fixed2(pct(row.ancestral.precision)) << '\t'
        << fixed2(pct(row.ancestral.recall)) << '\t' << fixed2(pct(row.ancestral.f1)) << '\t'
        << row.violations.root_count << '\t' << row.violations.multi_parent_nodes.size()
        << '\t' << (row.violations.is_consistent ? "yes" : "no") << '\n';
  }
  out << '\n';
  out << "taxonomies\t" << report.per_taxonomy.size() << '\n';
  out << "precision\t" << fixed2(pct(report.macro.precision)) << '\n';
  out << "recall\t" << fixed2(pct(report.macro.recall)) << '\n';
  out << "f1\t" << fixed2(pct(report.macro.f1)) << '\n';
  out << "roots_avg\t" << fixed2(report.consistency.roots_avg) << '\n';
  out << "nrg_pct\t" << fixed2(report.consistency.nrg_pct) << '\n';
  out << "parents_avg\t" << fixed2(report.consistency.parents_avg) << '\n';
  out << "mpn_pct\t" << fixed2(report.consistency.mpn_pct) << '\n';
}

void write_report_jsonl(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ostringstream buf;
  for (const PerTaxonomy& row : report.per_taxonomy) {
    nlohmann::json rec = {
        {"taxonomy_id", row.taxonomy_id},
        {"precision", row.ancestral.precision},
        {"recall", row.ancestral.recall},
        {"f1", row.ancestral.f1},
        {"root_count", row.violations.root_count},
        {"multi_parent_nodes", row.violations.multi_parent_nodes.size()},
        {"unreachable_from_root", row.violations.unreachable_from_root},
        {"is_consistent", row.violations.is_consistent},
    };
    buf << rec.dump() << '\n';
  }
  nlohmann::json agg = {
      {"aggregate", true},
      {"taxonomies", report.per_taxonomy.size()},
      {"precision", report.macro.precision},
      {"recall", report.macro.recall},
      {"f1", report.macro.f1},
      {"roots_avg", report.consistency.roots_avg},
      {"nrg_pct", report.consistency.nrg_pct},
      {"parents_avg", report.consistency.parents_avg},
      {"mpn_pct", report.consistency.mpn_pct},
  };
  buf << agg.dump() << '\n';
  io::write_text_atomic(path, buf.str());
}

}  // namespace taxokit::eval

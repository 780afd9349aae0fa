#include "accuracytrader/dimred.hpp"

#include <cmath>
#include <fstream>

namespace atr {

void SvdConfig::validate() const {
  if (dims < 1) throw UsageError("svd: dims must be >= 1");
  if (iters_per_dim < 1) throw UsageError("svd: iters_per_dim must be >= 1");
  if (learning_rate <= 0) throw UsageError("svd: learning_rate must be > 0");
  if (regularization < 0) throw UsageError("svd: regularization must be >= 0");
}

void FeatureMatrix::rebuild_lookup() const {
  row_lookup_.clear();
  for (std::size_t i = 0; i < row_ids.size(); ++i) row_lookup_.emplace(row_ids[i], i);
}

const std::vector<double>& FeatureMatrix::row_of(const PointId& id) const {
  if (row_lookup_.size() != row_ids.size()) rebuild_lookup();
  auto it = row_lookup_.find(id);
  if (it == row_lookup_.end()) throw InvariantError("FeatureMatrix: unknown row " + id);
  return row_features[it->second];
}

bool FeatureMatrix::has_row(const PointId& id) const {
  if (row_lookup_.size() != row_ids.size()) rebuild_lookup();
  return row_lookup_.count(id) != 0;
}

void FeatureMatrix::set_row(const PointId& id, std::vector<double> coords) {
  if (static_cast<int>(coords.size()) != dims)
    throw InvariantError("FeatureMatrix: wrong dimension for row " + id);
  if (row_lookup_.size() != row_ids.size()) rebuild_lookup();
  auto it = row_lookup_.find(id);
  if (it != row_lookup_.end()) {
    row_features[it->second] = std::move(coords);
  } else {
    row_lookup_.emplace(id, row_ids.size());
    row_ids.push_back(id);
    row_features.push_back(std::move(coords));
  }
}

void FeatureMatrix::drop_row(const PointId& id) {
  if (row_lookup_.size() != row_ids.size()) rebuild_lookup();
  auto it = row_lookup_.find(id);
  if (it == row_lookup_.end()) throw InvariantError("FeatureMatrix: unknown row " + id);
  std::size_t idx = it->second;
  row_ids.erase(row_ids.begin() + static_cast<std::ptrdiff_t>(idx));
  row_features.erase(row_features.begin() + static_cast<std::ptrdiff_t>(idx));
  rebuild_lookup();
}

double FeatureMatrix::reconstruct(std::size_t row, std::size_t col) const {
  double s = 0.0;
  for (int d = 0; d < dims; ++d) s += row_features[row][d] * col_features[col][d];
  return s;
}

FeatureMatrix reduce(const NumericDataset& data, const SvdConfig& cfg) {
  cfg.validate();
  const std::size_t u = data.row_ids.size();
  const std::size_t v = data.col_names.size();
  if (data.nnz() == 0) throw DataError("reduce: dataset has no observed entries");
  double maxabs = 0.0;
  for (auto& row : data.rows)
    for (auto& [c, val] : row) maxabs = std::max(maxabs, std::abs(val));
  if (maxabs == 0.0) throw DataError("reduce: dataset is all zeros");

  FeatureMatrix fm;
  fm.dims = cfg.dims;
  fm.row_ids = data.row_ids;
  fm.col_names = data.col_names;
  fm.row_features.assign(u, std::vector<double>(static_cast<std::size_t>(cfg.dims), 0.0));
  fm.col_features.assign(v, std::vector<double>(static_cast<std::size_t>(cfg.dims), 0.0));

  const double lr = cfg.learning_rate;
  const double reg = cfg.regularization;
  Rng rng(cfg.seed);
  std::vector<double> p(u), q(v);

  auto check_finite = [](double x) {
    if (!std::isfinite(x))
      throw DataError("reduce: training diverged; try a smaller learning rate");
  };

  if (!data.dense) {
    // Observed cells only (ratings). `residual` carries the value minus the
    // contribution of already-trained dimensions.
    struct Obs {
      std::uint32_t row, col;
      double residual;
    };
    std::vector<Obs> obs;
    obs.reserve(data.nnz());
    for (std::size_t r = 0; r < u; ++r)
      for (auto& [c, val] : data.rows[r])
        obs.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c), val});

    for (int d = 0; d < cfg.dims; ++d) {
      for (std::size_t i = 0; i < u; ++i) p[i] = 0.1 + rng.uniform(-0.01, 0.01);
      for (std::size_t i = 0; i < v; ++i) q[i] = 0.1 + rng.uniform(-0.01, 0.01);
      for (int iter = 0; iter < cfg.iters_per_dim; ++iter) {
        for (auto& o : obs) {
          double err = o.residual - p[o.row] * q[o.col];
          double pr = p[o.row];
          p[o.row] += lr * (err * q[o.col] - reg * pr);
          q[o.col] += lr * (err * pr - reg * q[o.col]);
        }
      }
      for (std::size_t i = 0; i < u; ++i) {
        check_finite(p[i]);
        fm.row_features[i][static_cast<std::size_t>(d)] = p[i];
      }
      for (std::size_t i = 0; i < v; ++i) {
        check_finite(q[i]);
        fm.col_features[i][static_cast<std::size_t>(d)] = q[i];
      }
      for (auto& o : obs) o.residual -= p[o.row] * q[o.col];
    }
    return fm;
  }

  // Dense semantics (text): absent cells are occurrence count zero and
  // contribute to the loss. Their residual against the already-trained
  // dimensions is recomputed on the fly instead of being materialized.
  for (int d = 0; d < cfg.dims; ++d) {
    for (std::size_t i = 0; i < u; ++i) p[i] = 0.1 + rng.uniform(-0.01, 0.01);
    for (std::size_t i = 0; i < v; ++i) q[i] = 0.1 + rng.uniform(-0.01, 0.01);
    for (int iter = 0; iter < cfg.iters_per_dim; ++iter) {
      for (std::size_t r = 0; r < u; ++r) {
        const auto& row = data.rows[r];
        const auto* prev = fm.row_features[r].data();
        std::size_t next = 0;
        double pr_acc = p[r];
        for (std::size_t c = 0; c < v; ++c) {
          double val = 0.0;
          if (next < row.size() && static_cast<std::size_t>(row[next].first) == c)
            val = row[next++].second;
          double res = val;
          const auto* qprev = fm.col_features[c].data();
          for (int k = 0; k < d; ++k) res -= prev[k] * qprev[k];
          double err = res - pr_acc * q[c];
          double pr = pr_acc;
          pr_acc += lr * (err * q[c] - reg * pr);
          q[c] += lr * (err * pr - reg * q[c]);
        }
        p[r] = pr_acc;
      }
    }
    for (std::size_t i = 0; i < u; ++i) {
      check_finite(p[i]);
      fm.row_features[i][static_cast<std::size_t>(d)] = p[i];
    }
    for (std::size_t i = 0; i < v; ++i) {
      check_finite(q[i]);
      fm.col_features[i][static_cast<std::size_t>(d)] = q[i];
    }
  }
  return fm;
}

std::vector<double> project_row(const FeatureMatrix& features,
                                const std::vector<std::pair<std::string, double>>& attrs,
                                double regularization, bool dense_zeros) {
  const int j = features.dims;
  std::map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < features.col_names.size(); ++i)
    col_of.emplace(features.col_names[i], i);

  // Normal equations (Q'Q + reg I) x = Q'y. With dense semantics every
  // column participates in Q'Q (the row value there is zero); otherwise only
  // the observed attributes do.
  std::vector<std::vector<double>> a(static_cast<std::size_t>(j),
                                     std::vector<double>(static_cast<std::size_t>(j), 0.0));
  std::vector<double> b(static_cast<std::size_t>(j), 0.0);
  auto accumulate_a = [&](const std::vector<double>& qrow) {
    for (int r = 0; r < j; ++r)
      for (int c = 0; c < j; ++c)
        a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] +=
            qrow[static_cast<std::size_t>(r)] * qrow[static_cast<std::size_t>(c)];
  };
  if (dense_zeros)
    for (const auto& qrow : features.col_features) accumulate_a(qrow);
  for (auto& [name, value] : attrs) {
    auto it = col_of.find(name);
    if (it == col_of.end()) continue;  // attribute unseen at reduction time
    const auto& qrow = features.col_features[it->second];
    if (!dense_zeros) accumulate_a(qrow);
    for (int r = 0; r < j; ++r)
      b[static_cast<std::size_t>(r)] += qrow[static_cast<std::size_t>(r)] * value;
  }
  double reg = regularization > 0 ? regularization : 1e-9;
  for (int r = 0; r < j; ++r) a[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] += reg;

  // Gaussian elimination with partial pivoting; j is tiny.
  std::vector<double> x(static_cast<std::size_t>(j), 0.0);
  for (int col = 0; col < j; ++col) {
    int pivot = col;
    for (int r = col + 1; r < j; ++r)
      if (std::abs(a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
          std::abs(a[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(col)]))
        pivot = r;
    std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(pivot)]);
    std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(pivot)]);
    double diag = a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    if (diag == 0.0) continue;  // regularized, should not happen
    for (int r = col + 1; r < j; ++r) {
      double f = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] / diag;
      if (f == 0.0) continue;
      for (int c = col; c < j; ++c)
        a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
            f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  for (int r = j - 1; r >= 0; --r) {
    double s = b[static_cast<std::size_t>(r)];
    for (int c = r + 1; c < j; ++c)
      s -= a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
    double diag = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
    x[static_cast<std::size_t>(r)] = diag != 0.0 ? s / diag : 0.0;
  }
  return x;
}

namespace {

void save_features(const std::vector<std::string>& keys,
                   const std::vector<std::vector<double>>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out << keys[i];
    for (double f : rows[i]) out << ',' << format_double(f);
    out << '\n';
  }
}

void load_features(const std::string& path, std::vector<std::string>& keys,
                   std::vector<std::vector<double>>& rows, int& dims) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() < 2) throw DataError(path + ":" + std::to_string(lineno) + ": bad row");
    keys.push_back(fields[0]);
    std::vector<double> f;
    for (std::size_t i = 1; i < fields.size(); ++i)
      f.push_back(parse_double(fields[i], path + ":" + std::to_string(lineno)));
    if (dims == 0) dims = static_cast<int>(f.size());
    if (static_cast<int>(f.size()) != dims)
      throw DataError(path + ":" + std::to_string(lineno) + ": inconsistent dimension");
    rows.push_back(std::move(f));
  }
}

}  // namespace

void FeatureMatrix::save_rows_csv(const std::string& path) const {
  std::vector<std::string> keys(row_ids.begin(), row_ids.end());
  save_features(keys, row_features, path);
}

void FeatureMatrix::save_cols_csv(const std::string& path) const {
  save_features(col_names, col_features, path);
}

FeatureMatrix FeatureMatrix::load_csv(const std::string& rows_path, const std::string& cols_path) {
  FeatureMatrix fm;
  int dims = 0;
  std::vector<std::string> row_keys;
  load_features(rows_path, row_keys, fm.row_features, dims);
  fm.row_ids.assign(row_keys.begin(), row_keys.end());
  int cdims = dims;
  load_features(cols_path, fm.col_names, fm.col_features, cdims);
  if (cdims != dims && !fm.col_names.empty() && !fm.row_ids.empty())
    throw DataError("feature files disagree on dimension");
  fm.dims = dims;
  return fm;
}

}  // namespace atr

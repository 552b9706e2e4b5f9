#include "binn/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>

namespace binn {

namespace {

struct Centered {
  Matrix X;          // column-centered
  Vector y;          // mean-centered
  Vector col_means;  // p
  double y_mean = 0.0;
};

Centered center(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) {
    throw LengthMismatch("fit: X rows != y length");
  }
  if (X.rows() < 1) throw InsufficientLines("fit: empty design matrix");
  Centered c;
  c.col_means = X.colwise().mean();
  c.X = X.rowwise() - c.col_means.transpose();
  c.y_mean = y.mean();
  c.y = y.array() - c.y_mean;
  return c;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

Vector RidgeModel::predict(const Matrix& X) const {
  return (X * coefficients).array() + intercept;
}

RidgeModel ridge_fit_feature_form(const Matrix& X, const Vector& y, double alpha) {
  if (alpha < 0) throw Error("ridge: alpha must be nonnegative");
  const Centered c = center(X, y);
  Matrix A = c.X.transpose() * c.X;
  A.diagonal().array() += alpha;
  const Vector b = c.X.transpose() * c.y;
  const Vector beta = A.ldlt().solve(b);

  RidgeModel model;
  model.alpha = alpha;
  model.coefficients = beta;
  model.intercept = c.y_mean - c.col_means.dot(beta);
  return model;
}

RidgeModel ridge_fit(const Matrix& X, const Vector& y, double alpha) {
  if (alpha < 0) throw Error("ridge: alpha must be nonnegative");
  const Centered c = center(X, y);
  const Index n = X.rows(), p = X.cols();

  Vector beta;
  if (alpha == 0.0) {
    // OLS limit. Centering absorbs one rank into the intercept, so judge
    // deficiency on the augmented design [X 1]: rank(X~) + 1 must reach
    // min(n, p + 1) for the fitted values to be unique.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c.X);
    if (cod.rank() + 1 < std::min<Index>(n, p + 1)) {
      throw SingularSystem("ridge: rank-deficient design at alpha = 0");
    }
    beta = cod.solve(c.y);
  } else if (p <= n) {
    Matrix A = c.X.transpose() * c.X;
    A.diagonal().array() += alpha;
    beta = A.ldlt().solve(c.X.transpose() * c.y);
  } else {
    // Gram form: cheaper whenever there are fewer lines than markers.
    Matrix G = c.X * c.X.transpose();
    G.diagonal().array() += alpha;
    beta = c.X.transpose() * G.ldlt().solve(c.y);
  }

  RidgeModel model;
  model.alpha = alpha;
  model.coefficients = beta;
  model.intercept = c.y_mean - c.col_means.dot(beta);
  return model;
}

Vector ElasticNetModel::predict(const Matrix& X) const {
  return (X * coefficients).array() + intercept;
}

std::vector<Index> ElasticNetModel::support() const {
  std::vector<Index> s;
  for (Index k = 0; k < coefficients.size(); ++k) {
    if (coefficients[k] != 0.0) s.push_back(k);
  }
  return s;
}

double lasso_critical_penalty(const Matrix& X, const Vector& y) {
  const Centered c = center(X, y);
  return (c.X.transpose() * c.y).cwiseAbs().maxCoeff() /
         static_cast<double>(X.rows());
}

ElasticNetModel elastic_net_fit(const Matrix& X, const Vector& y, double penalty,
                                double l1_ratio, double tol, int max_iter) {
  if (penalty < 0) throw Error("elastic net: penalty must be nonnegative");
  if (l1_ratio < 0 || l1_ratio > 1) throw Error("elastic net: l1_ratio must be in [0,1]");
  const Centered c = center(X, y);
  const Index n = X.rows(), p = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector colsq(p);
  for (Index k = 0; k < p; ++k) colsq[k] = c.X.col(k).squaredNorm() * inv_n;

  const double l1 = penalty * l1_ratio;
  const double l2 = penalty * (1.0 - l1_ratio);

  Vector beta = Vector::Zero(p);
  Vector residual = c.y;
  ElasticNetModel model;
  model.penalty = penalty;
  model.l1_ratio = l1_ratio;

  int it = 0;
  for (; it < max_iter; ++it) {
    double max_update = 0.0;
    for (Index k = 0; k < p; ++k) {
      if (colsq[k] == 0.0) continue;  // constant column stays at 0
      const double old = beta[k];
      const double rho = c.X.col(k).dot(residual) * inv_n + colsq[k] * old;
      const double updated = soft_threshold(rho, l1) / (colsq[k] + l2);
      if (updated != old) {
        residual -= c.X.col(k) * (updated - old);
        beta[k] = updated;
        max_update = std::max(max_update, std::abs(updated - old));
      }
    }
    if (max_update <= tol) {
      model.converged = true;
      ++it;
      break;
    }
  }

  model.iterations = it;
  model.coefficients = beta;
  model.intercept = c.y_mean - c.col_means.dot(beta);
  return model;
}

FcnModel::FcnModel(Index n_features, const SubnetSpec& spec, std::uint64_t seed)
    : net_(n_features, spec), spec_(spec), seed_(seed) {
  if (spec.hidden_widths.empty()) {
    throw Error("fcn: at least one hidden layer required");
  }
  std::mt19937_64 rng(seed);
  net_.init_parameters(rng);
}

Vector FcnModel::parameters() const {
  Vector out(net_.parameter_count());
  net_.get_parameters(out);
  return out;
}

void FcnModel::set_parameters(const Vector& theta) { net_.set_parameters(theta); }

Vector FcnModel::predict(const Matrix& X) const { return net_.forward(X).col(0); }

double FcnModel::loss_and_gradient(const Matrix& X, const Vector& y,
                                   const IntermediateTruth* truth,
                                   const LossConfig& config, Vector& grad) const {
  // No entity-aligned latents, so constrained modes degrade to plain MSE.
  (void)truth;
  (void)config;
  std::vector<Matrix> acts;
  const Matrix yhat = net_.forward(X, acts);
  const LossConfig plain{LossMode::kMse, 0.0};
  const LossGradient lg = loss_gradient(y, yhat.col(0), {}, nullptr, plain);
  grad = Vector::Zero(net_.parameter_count());
  net_.backward(acts, lg.d_prediction, grad, nullptr);
  return lg.value.total;
}

SubnetSpec fcn_spec_for_budget(Index n_features, Index target_params, int hidden_layers) {
  if (hidden_layers < 1) throw Error("fcn budget: need at least one hidden layer");
  const auto params_for = [&](Index w) {
    Index total = n_features * w + w;  // input layer
    for (int l = 1; l < hidden_layers; ++l) total += w * w + w;
    total += w + 1;  // output layer
    return total;
  };
  Index w = 1;
  while (params_for(w + 1) <= target_params) ++w;
  // Pick whichever side of the target is closer.
  if (std::abs(static_cast<long long>(params_for(w + 1)) - target_params) <
      std::abs(static_cast<long long>(params_for(w)) - target_params)) {
    ++w;
  }
  SubnetSpec spec;
  spec.hidden_widths.assign(static_cast<std::size_t>(hidden_layers), static_cast<int>(w));
  spec.activation = Activation::kSigmoid;
  spec.output_activation = Activation::kIdentity;
  spec.output_width = 1;
  return spec;
}

}  // namespace binn

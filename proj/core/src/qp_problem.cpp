#include <dfgm/qp_problem.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dfgm {

namespace {

constexpr double kSymmetryTol = 1e-12;

bool all_finite(const Matrix& a) { return a.allFinite(); }
bool all_finite(const Vector& a) { return a.allFinite(); }

bool is_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) return false;
  const double scale = a.size() > 0 ? a.cwiseAbs().maxCoeff() : 0.0;
  double asym = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = i + 1; j < a.cols(); ++j) asym = std::max(asym, std::abs(a(i, j) - a(j, i)));
  return asym <= kSymmetryTol * scale;
}

bool is_positive_definite(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  for (Index i = 0; i < a.rows(); ++i)
    if (!(a(i, i) > 0.0)) return false;
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

ValidationReport validate_qp(const QpProblem& p) {
  ValidationReport rep;
  auto fail = [&rep](std::string msg) {
    rep.ok = false;
    rep.violations.push_back(std::move(msg));
  };

  const Index n = p.H.rows();
  if (n == 0) fail("H is empty");
  if (p.H.cols() != n) fail("H not square");
  if (p.g.size() != n) fail("g has length " + std::to_string(p.g.size()) + ", expected " + std::to_string(n));
  const Index m = p.C.rows();
  if (m > 0 && p.C.cols() != n)
    fail("C has " + std::to_string(p.C.cols()) + " columns, expected " + std::to_string(n));
  if (p.d.size() != m)
    fail("d has length " + std::to_string(p.d.size()) + ", expected " + std::to_string(m));

  if (!all_finite(p.H) || !all_finite(p.g) || !all_finite(p.C) || !all_finite(p.d))
    fail("non-finite entries present");

  if (p.H.cols() == n && n > 0 && all_finite(p.H)) {
    if (!is_symmetric(p.H)) {
      fail("H not symmetric");
    } else if (!is_positive_definite(p.H)) {
      fail("H not positive definite");
    }
  }
  return rep;
}

QpProblem condense_mpc(const MpcModel& mdl) {
  const Index nx = mdl.A.rows();
  const Index nu = mdl.B.cols();
  const Index N = mdl.horizon;

  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("condense_mpc: ") + what);
  };
  require(N >= 1, "horizon must be >= 1");
  require(mdl.A.cols() == nx, "A not square");
  require(mdl.B.rows() == nx, "B row count mismatch");
  require(mdl.Q.rows() == nx && mdl.Q.cols() == nx, "Q must be nx x nx");
  require(mdl.R.rows() == nu && mdl.R.cols() == nu, "R must be nu x nu");
  require(mdl.u_min.size() == nu && mdl.u_max.size() == nu, "input bounds must have length nu");
  require(mdl.x0.size() == nx, "x0 must have length nx");
  require((mdl.u_min.array() <= mdl.u_max.array()).all(), "u_min must be <= u_max");
  require(is_symmetric(mdl.Q), "Q not symmetric");
  require(is_symmetric(mdl.R), "R not symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(mdl.Q);
    const double scale = std::max(1.0, mdl.Q.cwiseAbs().maxCoeff());
    require(es.eigenvalues().minCoeff() >= -1e-12 * scale, "Q not positive semidefinite");
  }
  require(is_positive_definite(mdl.R), "R not positive definite");

  // Phi stacks A, A^2, ..., A^N; G holds the impulse responses, block
  // (i,j) = A^(i-j) B below the diagonal.
  Matrix phi(N * nx, nx);
  Matrix gamma = Matrix::Zero(N * nx, N * nu);
  Matrix apow = Matrix::Identity(nx, nx);
  std::vector<Matrix> apow_b;  // A^k B for k = 0..N-1
  apow_b.reserve(static_cast<size_t>(N));
  apow_b.push_back(mdl.B);
  for (Index k = 1; k < N; ++k) apow_b.push_back(Matrix(mdl.A * apow_b.back()));
  for (Index i = 0; i < N; ++i) {
    apow = Matrix(mdl.A * apow);  // A^(i+1)
    phi.block(i * nx, 0, nx, nx) = apow;
    for (Index j = 0; j <= i; ++j)
      gamma.block(i * nx, j * nu, nx, nu) = apow_b[static_cast<size_t>(i - j)];
  }

  Matrix qbar = Matrix::Zero(N * nx, N * nx);
  Matrix rbar = Matrix::Zero(N * nu, N * nu);
  for (Index i = 0; i < N; ++i) {
    qbar.block(i * nx, i * nx, nx, nx) = mdl.Q;
    rbar.block(i * nu, i * nu, nu, nu) = mdl.R;
  }

  QpProblem p;
  p.H = gamma.transpose() * qbar * gamma + rbar;
  p.H = Matrix(0.5 * (p.H + p.H.transpose()));  // exact symmetry for downstream checks
  p.g = gamma.transpose() * (qbar * (phi * mdl.x0));

  const Index nvar = N * nu;
  p.C.resize(2 * nvar, nvar);
  p.C.topRows(nvar) = Matrix::Identity(nvar, nvar);
  p.C.bottomRows(nvar) = -Matrix::Identity(nvar, nvar);
  p.d.resize(2 * nvar);
  for (Index k = 0; k < N; ++k) {
    p.d.segment(k * nu, nu) = mdl.u_max;
    p.d.segment(nvar + k * nu, nu) = -mdl.u_min;
  }

  if (!is_positive_definite(p.H))
    throw FactorizationError("condense_mpc: assembled H is not positive definite");
  return p;
}

namespace {

// Whitespace/comment-aware tokenizer that remembers the line each token
// started on. Parsing is token-stream based; the row layout in the grammar
// is what save_qp emits, not a hard requirement on input.
class Tokenizer {
public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  // Returns false at end of input.
  bool next(std::string& out) {
    skip_ws_and_comments();
    if (pos_ >= text_.size()) return false;
    token_line_ = line_;
    size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '#')
      ++pos_;
    out.assign(text_.substr(start, pos_ - start));
    return true;
  }

  int token_line() const { return token_line_; }
  int current_line() const { return line_; }

private:
  void skip_ws_and_comments() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  int token_line_ = 1;
};

long parse_count(const std::string& tok, int line, const char* what) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || value < 0)
    throw ParseError(line, std::string("malformed header: bad ") + what + " '" + tok + "'");
  return value;
}

double parse_number(Tokenizer& tz, const char* section) {
  std::string tok;
  if (!tz.next(tok))
    throw ParseError(tz.current_line(),
                     std::string("dimension mismatch: unexpected end of input in section ") + section);
  if (!tok.empty() && tok.back() == ':')
    throw ParseError(tz.token_line(), std::string("dimension mismatch: section ") + section +
                                          " ended early at '" + tok + "'");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(tz.token_line(), "non-numeric token '" + tok + "' in section " + section);
  return value;
}

void expect_tag(Tokenizer& tz, const char* tag) {
  std::string tok;
  if (!tz.next(tok))
    throw ParseError(tz.current_line(), std::string("missing section ") + tag);
  if (tok != tag)
    throw ParseError(tz.token_line(),
                     std::string("expected section ") + tag + ", found '" + tok + "'");
}

}  // namespace

QpProblem load_qp(std::string_view text) {
  Tokenizer tz(text);
  std::string tok;

  if (!tz.next(tok)) throw ParseError(1, "malformed header: empty input");
  if (tok != "QP") throw ParseError(tz.token_line(), "malformed header: expected 'QP', found '" + tok + "'");
  if (!tz.next(tok)) throw ParseError(tz.current_line(), "malformed header: missing dimensions");
  const long n = parse_count(tok, tz.token_line(), "primal dimension");
  if (!tz.next(tok)) throw ParseError(tz.current_line(), "malformed header: missing constraint count");
  const long m = parse_count(tok, tz.token_line(), "constraint count");
  if (n < 1) throw ParseError(tz.token_line(), "malformed header: primal dimension must be >= 1");

  QpProblem p;
  expect_tag(tz, "H:");
  p.H.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) p.H(i, j) = parse_number(tz, "H");

  expect_tag(tz, "g:");
  p.g.resize(n);
  for (Index i = 0; i < n; ++i) p.g[i] = parse_number(tz, "g");

  if (m > 0) {
    expect_tag(tz, "C:");
    p.C.resize(m, n);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) p.C(i, j) = parse_number(tz, "C");
    expect_tag(tz, "d:");
    p.d.resize(m);
    for (Index i = 0; i < m; ++i) p.d[i] = parse_number(tz, "d");
  } else {
    p.C.resize(0, n);
    p.d.resize(0);
  }

  if (tz.next(tok))
    throw ParseError(tz.token_line(), "dimension mismatch: trailing token '" + tok + "'");
  return p;
}

std::string save_qp(const QpProblem& p) {
  std::ostringstream out;
  const Index n = p.n();
  const Index m = p.m();
  out << "QP " << n << ' ' << m << '\n';
  out << "H:\n";
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) out << (j ? " " : "") << format_double(p.H(i, j));
    out << '\n';
  }
  out << "g:\n";
  for (Index i = 0; i < n; ++i) out << (i ? " " : "") << format_double(p.g[i]);
  out << '\n';
  if (m > 0) {
    out << "C:\n";
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) out << (j ? " " : "") << format_double(p.C(i, j));
      out << '\n';
    }
    out << "d:\n";
    for (Index i = 0; i < m; ++i) out << (i ? " " : "") << format_double(p.d[i]);
    out << '\n';
  }
  return out.str();
}

QpProblem load_qp_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_qp(buf.str());
}

}  // namespace dfgm

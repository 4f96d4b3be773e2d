#include <dfgm/kernels.hpp>

#include <algorithm>
#include <charconv>
#include <thread>
#include <vector>

namespace dfgm {

namespace {

// In-place pairwise halving over buf[0..k). The unpaired tail element of an
// odd level is carried up unchanged.
double tree_reduce(double* buf, Index k) {
  if (k == 0) return 0.0;
  while (k > 1) {
    const Index half = k / 2;
    for (Index i = 0; i < half; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
    if (k & 1) {
      buf[half] = buf[k - 1];
      k = half + 1;
    } else {
      k = half;
    }
  }
  return buf[0];
}

double naive_row(const double* row, const double* x, Index q) {
  double acc = 0.0;
  for (Index j = 0; j < q; ++j) acc += row[j] * x[j];
  return acc;
}

double tree_row(const double* row, const double* x, Index q, double* scratch) {
  for (Index j = 0; j < q; ++j) scratch[j] = row[j] * x[j];
  return tree_reduce(scratch, q);
}

}  // namespace

std::string Backend::name() const {
  switch (kind) {
    case BackendKind::naive:
      return "naive";
    case BackendKind::tree:
      return "tree";
    case BackendKind::blocked:
      return "blocked:" + std::to_string(block_rows);
    case BackendKind::parallel:
      return "parallel:" + std::to_string(workers);
  }
  return "unknown";
}

Backend parse_backend(std::string_view spec) {
  std::string_view head = spec;
  std::string_view arg;
  if (auto colon = spec.find(':'); colon != std::string_view::npos) {
    head = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }
  auto parse_int = [&](std::string_view s, long fallback) -> long {
    if (s.empty()) return fallback;
    long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || value < 1)
      throw std::invalid_argument("bad backend parameter '" + std::string(spec) + "'");
    return value;
  };
  if (head == "naive" && arg.empty()) return Backend::naive();
  if (head == "tree" && arg.empty()) return Backend::tree();
  if (head == "blocked") return Backend::blocked(parse_int(arg, 8));
  if (head == "parallel") return Backend::parallel(static_cast<int>(parse_int(arg, 4)));
  throw std::invalid_argument("unknown backend '" + std::string(spec) + "'");
}

Vector matvec(const Matrix& A, const Vector& x, const Backend& backend) {
  if (A.cols() != x.size())
    throw DimensionError("matvec: matrix has " + std::to_string(A.cols()) +
                         " columns but vector has " + std::to_string(x.size()) + " entries");
  const Index p = A.rows();
  const Index q = A.cols();
  Vector out(p);
  if (p == 0) return out;
  if (q == 0) {
    out.setZero();
    return out;
  }

  switch (backend.kind) {
    case BackendKind::naive: {
      for (Index i = 0; i < p; ++i) out[i] = naive_row(A.row(i).data(), x.data(), q);
      break;
    }
    case BackendKind::tree: {
      std::vector<double> scratch(static_cast<size_t>(q));
      for (Index i = 0; i < p; ++i) out[i] = tree_row(A.row(i).data(), x.data(), q, scratch.data());
      break;
    }
    case BackendKind::blocked: {
      const Index rb = std::clamp<Index>(backend.block_rows, 1, p);
      std::vector<double> scratch(static_cast<size_t>(q));
      for (Index start = 0; start < p; start += rb) {
        const Index end = std::min(start + rb, p);
        for (Index i = start; i < end; ++i)
          out[i] = tree_row(A.row(i).data(), x.data(), q, scratch.data());
      }
      break;
    }
    case BackendKind::parallel: {
      const Index rb = std::clamp<Index>(backend.block_rows, 1, p);
      const Index nblocks = (p + rb - 1) / rb;
      const int workers =
          static_cast<int>(std::clamp<Index>(backend.workers, 1, nblocks));
      auto run = [&](int w) {
        std::vector<double> scratch(static_cast<size_t>(q));
        // Blocks are dealt round-robin; each output row is written by
        // exactly one worker and per-row arithmetic matches tree_row, so
        // the result does not depend on the worker count.
        for (Index blk = w; blk < nblocks; blk += workers) {
          const Index start = blk * rb;
          const Index end = std::min(start + rb, p);
          for (Index i = start; i < end; ++i)
            out[i] = tree_row(A.row(i).data(), x.data(), q, scratch.data());
        }
      };
      if (workers == 1) {
        run(0);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
      }
      break;
    }
  }
  return out;
}

double tree_sum(std::span<const double> v) {
  std::vector<double> scratch(v.begin(), v.end());
  return tree_reduce(scratch.data(), static_cast<Index>(scratch.size()));
}

Vector project_nonneg(const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = v[i] < 0.0 ? 0.0 : v[i];
  return out;
}

double dot(const Vector& a, const Vector& b, const Backend& backend) {
  if (a.size() != b.size())
    throw DimensionError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  const Index k = a.size();
  if (backend.kind == BackendKind::naive) {
    double acc = 0.0;
    for (Index i = 0; i < k; ++i) acc += a[i] * b[i];
    return acc;
  }
  std::vector<double> scratch(static_cast<size_t>(k));
  for (Index i = 0; i < k; ++i) scratch[static_cast<size_t>(i)] = a[i] * b[i];
  return tree_reduce(scratch.data(), k);
}

Vector axpy(double alpha, const Vector& x, const Vector& y) {
  if (x.size() != y.size())
    throw DimensionError("axpy: length mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  return y + alpha * x;
}

}  // namespace dfgm

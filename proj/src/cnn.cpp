// conv3x3(1->c1) -> relu -> conv3x3(c1->c2) -> relu -> maxpool 2x2
//   -> fc(6*4*c2 -> hidden) -> relu -> fc(hidden -> 5)
// Images are 12 x 8 (channels x features), zero padded by one pixel.
// Activations are stored as (feature maps) x (pixels * batch), pixel-major
// within a sample, so each convolution is a single GEMM over im2col columns.

#include <limits>

#include "twopoint/model.hpp"

namespace twopoint::models::detail {

namespace {

constexpr int kRows = static_cast<int>(kChannels);
constexpr int kCols = static_cast<int>(kFeatures);
constexpr int kPixels = kRows * kCols;
constexpr int kPoolRows = kRows / 2;
constexpr int kPoolCols = kCols / 2;
constexpr int kPooled = kPoolRows * kPoolCols;

// in: maps x (kPixels * batch). Returns (maps * 9) x (kPixels * batch).
Matrix im2col(const Matrix& in) {
  const Eigen::Index maps = in.rows();
  const Eigen::Index batch = in.cols() / kPixels;
  Matrix cols = Matrix::Zero(maps * 9, in.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index base = b * kPixels;
    for (int r = 0; r < kRows; ++r) {
      for (int c = 0; c < kCols; ++c) {
        const Eigen::Index col = base + r * kCols + c;
        for (int dr = -1; dr <= 1; ++dr) {
          const int rr = r + dr;
          if (rr < 0 || rr >= kRows) continue;
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = c + dc;
            if (cc < 0 || cc >= kCols) continue;
            const Eigen::Index k = (dr + 1) * 3 + (dc + 1);
            const Eigen::Index src = base + rr * kCols + cc;
            for (Eigen::Index m = 0; m < maps; ++m) cols(m * 9 + k, col) = in(m, src);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col.
Matrix col2im(const Matrix& cols, Eigen::Index maps) {
  Matrix in = Matrix::Zero(maps, cols.cols());
  const Eigen::Index batch = cols.cols() / kPixels;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index base = b * kPixels;
    for (int r = 0; r < kRows; ++r) {
      for (int c = 0; c < kCols; ++c) {
        const Eigen::Index col = base + r * kCols + c;
        for (int dr = -1; dr <= 1; ++dr) {
          const int rr = r + dr;
          if (rr < 0 || rr >= kRows) continue;
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = c + dc;
            if (cc < 0 || cc >= kCols) continue;
            const Eigen::Index k = (dr + 1) * 3 + (dc + 1);
            const Eigen::Index dst = base + rr * kCols + cc;
            for (Eigen::Index m = 0; m < maps; ++m) in(m, dst) += cols(m * 9 + k, col);
          }
        }
      }
    }
  }
  return in;
}

struct Pooled {
  Matrix out;                           // (maps * kPooled) x batch
  std::vector<Eigen::Index> argmax;     // column in the input map per output entry
};

Pooled maxpool(const Matrix& a) {
  const Eigen::Index maps = a.rows();
  const Eigen::Index batch = a.cols() / kPixels;
  Pooled p;
  p.out.resize(maps * kPooled, batch);
  p.argmax.resize(static_cast<std::size_t>(p.out.size()));
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index m = 0; m < maps; ++m) {
      for (int pr = 0; pr < kPoolRows; ++pr) {
        for (int pc = 0; pc < kPoolCols; ++pc) {
          double best = -std::numeric_limits<double>::infinity();
          Eigen::Index best_col = 0;
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
              const Eigen::Index col = b * kPixels + (2 * pr + i) * kCols + (2 * pc + j);
              if (a(m, col) > best) {
                best = a(m, col);
                best_col = col;
              }
            }
          }
          const Eigen::Index row = m * kPooled + pr * kPoolCols + pc;
          p.out(row, b) = best;
          p.argmax[static_cast<std::size_t>(b * p.out.rows() + row)] = best_col;
        }
      }
    }
  }
  return p;
}

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }
Matrix relu_mask(const Matrix& z) { return (z.array() > 0.0).cast<double>().matrix(); }

struct Activations {
  Matrix cols1, z1, a1, cols2, z2, a2;
  Pooled pool;
  Matrix f1, r1, y;
};

Activations run_forward(const std::vector<Matrix>& p, const Matrix& x) {
  Activations s;
  const Eigen::Map<const Matrix> image(x.data(), 1, x.size());
  s.cols1 = im2col(image);
  s.z1 = (p[0] * s.cols1).colwise() + p[1].col(0);
  s.a1 = relu(s.z1);
  s.cols2 = im2col(s.a1);
  s.z2 = (p[2] * s.cols2).colwise() + p[3].col(0);
  s.a2 = relu(s.z2);
  s.pool = maxpool(s.a2);
  s.f1 = (p[4] * s.pool.out).colwise() + p[5].col(0);
  s.r1 = relu(s.f1);
  s.y = (p[6] * s.r1).colwise() + p[7].col(0);
  return s;
}

}  // namespace

Matrix cnn_forward(const ModelShape&, const std::vector<Matrix>& p, const Matrix& x) {
  return run_forward(p, x).y;
}

double cnn_loss_grad(const ModelShape& shape, const std::vector<Matrix>& p, const Matrix& x,
                     const Matrix& target, std::vector<Matrix>& grads) {
  const Activations s = run_forward(p, x);
  Matrix dy;
  const double loss = mse_grad(s.y, target, dy);

  grads[6].noalias() = dy * s.r1.transpose();
  grads[7] = dy.rowwise().sum();
  const Matrix df1 = (p[6].transpose() * dy).cwiseProduct(relu_mask(s.f1));
  grads[4].noalias() = df1 * s.pool.out.transpose();
  grads[5] = df1.rowwise().sum();
  const Matrix dpool = p[4].transpose() * df1;

  Matrix da2 = Matrix::Zero(s.a2.rows(), s.a2.cols());
  for (Eigen::Index b = 0; b < dpool.cols(); ++b) {
    for (Eigen::Index row = 0; row < dpool.rows(); ++row) {
      const Eigen::Index m = row / kPooled;
      da2(m, s.pool.argmax[static_cast<std::size_t>(b * dpool.rows() + row)]) += dpool(row, b);
    }
  }
  const Matrix dz2 = da2.cwiseProduct(relu_mask(s.z2));
  grads[2].noalias() = dz2 * s.cols2.transpose();
  grads[3] = dz2.rowwise().sum();
  const Matrix da1 = col2im(p[2].transpose() * dz2, shape.conv1);
  const Matrix dz1 = da1.cwiseProduct(relu_mask(s.z1));
  grads[0].noalias() = dz1 * s.cols1.transpose();
  grads[1] = dz1.rowwise().sum();
  return loss;
}

}  // namespace twopoint::models::detail

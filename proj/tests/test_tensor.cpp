#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tpca/tensor.hpp"
#include "tpca/tensor_io.hpp"

using tpca::CounterRng;
using tpca::Mat;
using tpca::Tensor3;
using tpca::Vec;

TEST(SampleGaussian, DeterministicAndFinite) {
  const Tensor3 a = tpca::sample_gaussian(2, 1.0, 1234u);
  const Tensor3 b = tpca::sample_gaussian(2, 1.0, 1234u);
  ASSERT_EQ(a.size(), 8u);
  EXPECT_TRUE(a.all_finite());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(SampleGaussian, MeanConcentrates) {
  const std::int64_t n = 50;
  const Tensor3 t = tpca::sample_gaussian(n, 1.0, 77u);
  double mean = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) mean += t.data()[i];
  mean /= static_cast<double>(t.size());
  // CLT: the sample mean of n^3 unit-variance draws has sd n^{-3/2}.
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n * n * n)) * 4.0);
}

TEST(SampleGaussian, VarianceConcentrates) {
  const std::int64_t n = 50;
  const double want = 9.0;
  const Tensor3 t = tpca::sample_gaussian(n, want, 78u);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += t.data()[i];
    s2 += t.data()[i] * t.data()[i];
  }
  const double mean = s / static_cast<double>(t.size());
  const double var = s2 / static_cast<double>(t.size()) - mean * mean;
  EXPECT_NEAR(var, want, 0.05 * want);
}

TEST(SampleGaussian, RejectsBadArguments) {
  EXPECT_THROW(tpca::sample_gaussian(0, 1.0, 1u), std::invalid_argument);
  EXPECT_THROW(tpca::sample_gaussian(4, 0.0, 1u), std::invalid_argument);
  EXPECT_THROW(tpca::sample_gaussian(4, -1.0, 1u), std::invalid_argument);
}

TEST(RankOne, BasisVector) {
  const Vec e1 = {1.0, 0.0, 0.0};
  const Tensor3 t = tpca::rank_one(e1, 5.0);
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      for (std::int64_t k = 0; k < 3; ++k)
        EXPECT_EQ(t(i, j, k), (i == 0 && j == 0 && k == 0) ? 5.0 : 0.0);
}

TEST(RankOne, UniformEntries) {
  const double r = 1.0 / std::sqrt(2.0);
  const Tensor3 t = tpca::rank_one({r, r}, 1.0);
  const double want = std::pow(2.0, -1.5);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t.data()[i], want, 1e-15);
}

TEST(RankOne, TrilinearClosedForm) {
  CounterRng rng(30, 0);
  Vec v = oracle::random_vec(6, rng);
  tpca::scale_inplace(v, 1.0 / tpca::norm(v));
  const double tau = 2.5;
  const Tensor3 t = tpca::rank_one(v, tau);
  const Vec x = oracle::random_vec(6, rng);
  const double want = tau * std::pow(tpca::dot(v, x), 3.0);
  EXPECT_LE(oracle::rel_err(tpca::trilinear(t, x, x, x), want), 1e-12);
  EXPECT_LE(oracle::rel_err(oracle::trilinear_naive(t, x, x, x), want), 1e-12);
}

TEST(Trilinear, BasisVectorsReadEntries) {
  CounterRng rng(31, 0);
  const Tensor3 t = oracle::random_tensor(3, rng);
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      for (std::int64_t k = 0; k < 3; ++k) {
        Vec ei(3, 0.0), ej(3, 0.0), ek(3, 0.0);
        ei[i] = ej[j] = ek[k] = 1.0;
        EXPECT_DOUBLE_EQ(tpca::trilinear(t, ei, ej, ek), t(i, j, k));
      }
}

TEST(Trilinear, ZeroTensorAndMismatch) {
  const Tensor3 z(3);
  const Vec x = {1.0, 2.0, 3.0};
  EXPECT_EQ(tpca::trilinear(z, x, x, x), 0.0);
  const Vec bad = {1.0, 2.0};
  EXPECT_THROW(tpca::trilinear(z, bad, x, x), std::invalid_argument);
}

TEST(Trilinear, MatchesNaiveSum) {
  CounterRng rng(32, 0);
  const Tensor3 t = oracle::random_tensor(3, rng);
  const Vec x = oracle::random_vec(3, rng), y = oracle::random_vec(3, rng),
            z = oracle::random_vec(3, rng);
  EXPECT_LE(oracle::rel_err(tpca::trilinear(t, x, y, z), oracle::trilinear_naive(t, x, y, z)),
            1e-13);
}

TEST(SymContractVec, RankOneClosedForm) {
  CounterRng rng(33, 0);
  Vec v = oracle::random_vec(5, rng);
  tpca::scale_inplace(v, 1.0 / tpca::norm(v));
  const double tau = 1.7;
  const Tensor3 t = tpca::rank_one(v, tau);
  const Vec x = oracle::random_vec(5, rng);
  const Vec got = tpca::sym_contract_vec(t, x);
  const Vec want = tpca::scaled(v, 3.0 * tau * tpca::dot(v, x) * tpca::dot(v, x));
  EXPECT_LE(oracle::rel_err_vec(got, want), 1e-12);
}

TEST(SymContractVec, ZeroAndNaive) {
  const Tensor3 z(4);
  const Vec x = {1.0, -1.0, 0.5, 2.0};
  EXPECT_EQ(tpca::norm(tpca::sym_contract_vec(z, x)), 0.0);

  CounterRng rng(34, 0);
  const Tensor3 t = oracle::random_tensor(4, rng);
  EXPECT_LE(oracle::rel_err_vec(tpca::sym_contract_vec(t, x), oracle::sym_contract_vec_naive(t, x)),
            1e-13);
}

TEST(SymContractMatrix, RankOneClosedForm) {
  CounterRng rng(35, 0);
  Vec v = oracle::random_vec(4, rng);
  tpca::scale_inplace(v, 1.0 / tpca::norm(v));
  const double tau = 0.9;
  const Tensor3 t = tpca::rank_one(v, tau);
  const Vec x = oracle::random_vec(4, rng);
  const Mat got = tpca::sym_contract_matrix(t, x);
  const double c = 3.0 * tau * tpca::dot(v, x);
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) EXPECT_NEAR(got(i, j), c * v[i] * v[j], 1e-12);
}

TEST(SymContractMatrix, ExactlySymmetricAndNaive) {
  CounterRng rng(36, 0);
  const Tensor3 t = oracle::random_tensor(4, rng);
  const Vec x = oracle::random_vec(4, rng);
  const Mat got = tpca::sym_contract_matrix(t, x);
  EXPECT_TRUE(got.exactly_symmetric());
  EXPECT_LE(oracle::rel_err_mat(got, oracle::sym_contract_matrix_naive(t, x)), 1e-13);
}

TEST(ModeDiagSum, RankOneAndZeroAndNaive) {
  CounterRng rng(37, 0);
  Vec v = oracle::random_vec(5, rng);
  tpca::scale_inplace(v, 1.0 / tpca::norm(v));
  const double tau = 4.0;
  const Vec got = tpca::mode_diag_sum(tpca::rank_one(v, tau));
  EXPECT_LE(oracle::rel_err_vec(got, tpca::scaled(v, 3.0 * tau)), 1e-12);

  EXPECT_EQ(tpca::norm(tpca::mode_diag_sum(Tensor3(4))), 0.0);

  const Tensor3 t = oracle::random_tensor(5, rng);
  EXPECT_LE(oracle::rel_err_vec(tpca::mode_diag_sum(t), oracle::mode_diag_sum_naive(t)), 1e-13);
}

TEST(FrobeniusSq, RankOneIsTauSquared) {
  CounterRng rng(38, 0);
  Vec v = oracle::random_vec(6, rng);
  tpca::scale_inplace(v, 1.0 / tpca::norm(v));
  const double tau = 3.5;
  EXPECT_LE(oracle::rel_err(tpca::frobenius_sq(tpca::rank_one(v, tau)), tau * tau), 1e-12);
  EXPECT_EQ(tpca::frobenius_sq(Tensor3(3)), 0.0);
}

TEST(FrobeniusSq, GaussianConcentrates) {
  const std::int64_t n = 40;
  const Tensor3 t = tpca::sample_gaussian(n, 1.0, 79u);
  const double want = static_cast<double>(n * n * n);
  EXPECT_NEAR(tpca::frobenius_sq(t), want, 0.05 * want);
}

TEST(FlattenGramMatvec, RankOneAndZeroAndNaive) {
  CounterRng rng(39, 0);
  Vec v = oracle::random_vec(4, rng);
  tpca::scale_inplace(v, 1.0 / tpca::norm(v));
  const double tau = 2.0;
  const Tensor3 t = tpca::rank_one(v, tau);
  EXPECT_LE(oracle::rel_err_vec(tpca::flatten_gram_matvec(t, v), tpca::scaled(v, tau * tau)), 1e-12);

  const Vec w = oracle::random_vec(4, rng);
  EXPECT_EQ(tpca::norm(tpca::flatten_gram_matvec(Tensor3(4), w)), 0.0);

  const Tensor3 r = oracle::random_tensor(4, rng);
  EXPECT_LE(oracle::rel_err_vec(tpca::flatten_gram_matvec(r, w),
                                oracle::flatten_gram_matvec_naive(r, w)),
            1e-13);
}

TEST(FlattenGramMatvec, SymmetricPositiveSemidefinite) {
  CounterRng rng(40, 0);
  const Tensor3 t = oracle::random_tensor(5, rng);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec w = oracle::random_vec(5, rng);
    const Vec w2 = oracle::random_vec(5, rng);
    EXPECT_GE(tpca::dot(w, tpca::flatten_gram_matvec(t, w)), 0.0);
    EXPECT_NEAR(tpca::dot(w, tpca::flatten_gram_matvec(t, w2)),
                tpca::dot(w2, tpca::flatten_gram_matvec(t, w)), 1e-10);
  }
}

TEST(Combine, DifferenceDoubleAndAssociativity) {
  CounterRng rng(41, 0);
  const Tensor3 t = oracle::random_tensor(3, rng);
  const Tensor3 u = oracle::random_tensor(3, rng);
  const Tensor3 diff = tpca::combine(t, u, 1.0, -1.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_DOUBLE_EQ(diff.data()[i], t.data()[i] - u.data()[i]);

  const Tensor3 twice = tpca::combine(t, Tensor3(3), 2.0, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(twice.data()[i], 2.0 * t.data()[i]);

  const Tensor3 b = oracle::random_tensor(3, rng);
  const Tensor3 way1 = tpca::combine(tpca::combine(t, u, 1.0, -1.0), b, 1.0, 1.0);
  const Tensor3 way2 = tpca::combine(t, tpca::combine(b, u, 1.0, -1.0), 1.0, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_NEAR(way1.data()[i], way2.data()[i], 1e-15 * (1.0 + std::abs(way1.data()[i])));

  EXPECT_THROW(tpca::combine(t, Tensor3(4), 1.0, 1.0), std::invalid_argument);
}

TEST(TensorInvariants, Multilinearity) {
  CounterRng rng(42, 0);
  for (std::int64_t n : {2, 5, 8}) {
    const Tensor3 t = oracle::random_tensor(n, rng);
    const Vec x = oracle::random_vec(n, rng), y = oracle::random_vec(n, rng),
              z = oracle::random_vec(n, rng), w = oracle::random_vec(n, rng);
    const double a = 1.3, b = -0.7;
    const double lhs = tpca::trilinear(t, tpca::axpy(tpca::scaled(x, a), b, y), z, w);
    const double rhs = a * tpca::trilinear(t, x, z, w) + b * tpca::trilinear(t, y, z, w);
    EXPECT_LE(oracle::rel_err(lhs, rhs), 1e-12);
  }
}

TEST(TensorInvariants, ContractionIsGradientOfCubicForm) {
  CounterRng rng(43, 0);
  for (std::int64_t n : {3, 6, 10}) {
    const Tensor3 t = oracle::random_tensor(n, rng);
    const Vec x = oracle::random_vec(n, rng);
    const Vec y = oracle::random_vec(n, rng);
    auto f = [&](const Vec& p) { return tpca::trilinear(t, p, p, p); };
    const Vec fd = oracle::fd_gradient(f, x, 1e-5);
    const double got = tpca::dot(tpca::sym_contract_vec(t, x), y);
    EXPECT_LE(oracle::rel_err(got, tpca::dot(fd, y)), 1e-6);
  }
}

TEST(TensorInvariants, TwiceContractionIsHessianOfCubicForm) {
  CounterRng rng(44, 0);
  for (std::int64_t n : {3, 5, 8}) {
    const Tensor3 t = oracle::random_tensor(n, rng);
    const Vec x = oracle::random_vec(n, rng);
    auto f = [&](const Vec& p) { return tpca::trilinear(t, p, p, p); };
    const Mat fd = oracle::fd_hessian(f, x, 1e-4);
    Mat got = tpca::sym_contract_matrix(t, x);
    for (double& v : got.a) v *= 2.0;
    EXPECT_LE(oracle::rel_err_mat(got, fd), 1e-5);
  }
}

TEST(TensorCaps, RefusesOversizedDimensions) {
  EXPECT_THROW(Tensor3(0), std::invalid_argument);
  EXPECT_THROW(Tensor3(tpca::kTensorMaxDim + 1), std::invalid_argument);
  // An explicit cap admits larger dimensions.
  EXPECT_NO_THROW(tpca::Tensor3f(16, 1024));
}

TEST(TensorIo, RoundTripIsBitExact) {
  CounterRng rng(45, 0);
  const Tensor3 t = oracle::random_tensor(6, rng);
  const std::string path = std::filesystem::temp_directory_path() / "tpca_io_test.tpc3";
  tpca::write_tpc3(t, path);
  const Tensor3 back = tpca::read_tpc3(path);
  ASSERT_EQ(back.dim(), t.dim());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(back.data()[i], t.data()[i]);
  std::filesystem::remove(path);
}

TEST(TensorIo, RejectsCorruptFiles) {
  const std::string dir = std::filesystem::temp_directory_path();
  const std::string path = dir + "/tpca_io_bad.tpc3";
  const Tensor3 t(3);

  tpca::write_tpc3(t, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');  // clobber the magic
  }
  EXPECT_THROW(tpca::read_tpc3(path), std::runtime_error);

  tpca::write_tpc3(t, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char bad_version = 9;
    f.put(bad_version);
  }
  EXPECT_THROW(tpca::read_tpc3(path), std::runtime_error);

  tpca::write_tpc3(t, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(tpca::read_tpc3(path), std::runtime_error);

  std::filesystem::remove(path);
}

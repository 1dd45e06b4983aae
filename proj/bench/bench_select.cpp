#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sdoh/select.hpp"

using namespace sdoh;

namespace {

struct Pool {
  std::vector<std::string> ids;
  std::vector<ProbProfile> profiles;
  std::vector<SampleVector> vectors;
};

Pool make_pool(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::gamma_distribution<double> gam(0.7, 1.0);
  Pool p;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "s" + std::to_string(i);
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
      x = g(rng);
      norm += x * x;
    }
    std::vector<std::vector<double>> heads;
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<double> d(5);
      double s = 0.0;
      for (auto& x : d) s += (x = gam(rng));
      for (auto& x : d) x /= s;
      heads.push_back(std::move(d));
    }
    p.ids.push_back(id);
    p.profiles.push_back({id, std::move(heads)});
    p.vectors.push_back({id, std::move(v), std::sqrt(norm)});
  }
  return p;
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  SelectionConfig cfg;
  cfg.batch_size = 50;
  std::printf("pool,dim,batch,path,threads,seconds,same_batch\n");
  for (std::size_t n : {500, 2000, 8000}) {
    const auto pool = make_pool(n, 128, n);
    const SelectionInputs inputs(pool.profiles, pool.vectors);
    Batch reference;
    const double ref_secs = n <= 2000 ? seconds([&] { reference = greedy_select_reference(pool.ids, inputs, cfg); }) : NAN;
    if (n <= 2000) std::printf("%zu,128,%zu,reference,1,%.4f,1\n", n, cfg.batch_size, ref_secs);
    Batch serial;
    for (int threads : {1, 2, 4, omp_get_num_procs()}) {
      omp_set_num_threads(threads);
      Batch fast;
      const double s = seconds([&] { fast = greedy_select(pool.ids, inputs, cfg); });
      if (threads == 1) serial = fast;
      const bool same = n <= 2000 ? fast.ids == reference.ids : fast.ids == serial.ids;
      std::printf("%zu,128,%zu,greedy,%d,%.4f,%d\n", n, cfg.batch_size, threads, s, same ? 1 : 0);
    }
  }
}

#include "finslab/smooth_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <sstream>

namespace finslab {

Box::Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw std::invalid_argument("Box: bound dimensions differ");
}

Box Box::unbounded(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return Box(std::vector<double>(dim, -inf), std::vector<double>(dim, inf));
}

Box Box::times(const Box& other) const {
  Box b = *this;
  b.lo.insert(b.lo.end(), other.lo.begin(), other.lo.end());
  b.hi.insert(b.hi.end(), other.hi.begin(), other.hi.end());
  return b;
}

bool Box::contains(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (!(p[i] >= lo[i] && p[i] <= hi[i])) return false;
  }
  return true;
}

double Box::margin(std::span<const double> p) const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) m = std::min({m, p[i] - lo[i], hi[i] - p[i]});
  return m;
}

bool Box::empty() const {
  for (int i = 0; i < dim(); ++i)
    if (!(lo[i] < hi[i])) return true;
  return false;
}

namespace {

class ExpansionCache {
 public:
  bool lookup(std::span<const double> z, int order, std::vector<Jet>& out) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(make_key(z, order));
    if (it == entries_.end()) return false;
    out = it->second;
    return true;
  }
  void store(std::span<const double> z, int order, const std::vector<Jet>& value) {
    std::lock_guard lock(mutex_);
    if (entries_.size() >= kCapacity) entries_.clear();
    entries_.emplace(make_key(z, order), value);
  }

 private:
  static constexpr std::size_t kCapacity = 2048;
  using Key = std::pair<std::string, int>;
  static Key make_key(std::span<const double> z, int order) {
    std::string bytes(z.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), z.data(), bytes.size());
    return {std::move(bytes), order};
  }
  mutable std::mutex mutex_;
  std::map<Key, std::vector<Jet>> entries_;
};

std::string format_point(std::span<const double> z) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  for (std::size_t i = 0; i < z.size(); ++i) os << (i ? ", " : "") << z[i];
  os << ')';
  return os.str();
}

}  // namespace

struct SmoothMap::Impl {
  int domain_dim = 0;
  int codomain_dim = 0;
  Box domain;
  std::string name;
  int order_overhead = 0;
  Evaluator eval;
  Expander expander;
  std::shared_ptr<ExpansionCache> cache;
};

SmoothMap::SmoothMap(int domain_dim, int codomain_dim, Box domain, Evaluator eval, std::string name) {
  if (domain.dim() != domain_dim) throw std::invalid_argument("SmoothMap: domain box dimension mismatch");
  auto impl = std::make_shared<Impl>();
  impl->domain_dim = domain_dim;
  impl->codomain_dim = codomain_dim;
  impl->domain = std::move(domain);
  impl->eval = std::move(eval);
  impl->name = std::move(name);
  impl_ = std::move(impl);
}

SmoothMap SmoothMap::from_expansion(int domain_dim, int codomain_dim, Box domain, Expander expand,
                                    std::string name, int order_overhead) {
  if (domain.dim() != domain_dim) throw std::invalid_argument("SmoothMap: domain box dimension mismatch");
  auto impl = std::make_shared<Impl>();
  impl->domain_dim = domain_dim;
  impl->codomain_dim = codomain_dim;
  impl->domain = std::move(domain);
  impl->expander = std::move(expand);
  impl->name = std::move(name);
  impl->order_overhead = order_overhead;
  impl->cache = std::make_shared<ExpansionCache>();
  SmoothMap m;
  m.impl_ = std::move(impl);
  return m;
}

SmoothMap SmoothMap::constant(std::vector<double> value, int domain_dim, Box domain, std::string name) {
  const int k = static_cast<int>(value.size());
  return SmoothMap(
      domain_dim, k, std::move(domain),
      [value = std::move(value)](std::span<const Jet> z) {
        const int nv = z.empty() ? 0 : z[0].num_vars();
        const int ord = z.empty() ? 0 : z[0].order();
        return constants(value, nv, ord);
      },
      std::move(name));
}

SmoothMap SmoothMap::zero(int domain_dim, int codomain_dim, Box domain) {
  return constant(std::vector<double>(codomain_dim, 0.0), domain_dim, std::move(domain), "0");
}

int SmoothMap::domain_dim() const { return impl_->domain_dim; }
int SmoothMap::codomain_dim() const { return impl_->codomain_dim; }
const Box& SmoothMap::domain() const { return impl_->domain; }
const std::string& SmoothMap::name() const { return impl_->name; }
int SmoothMap::order_overhead() const { return impl_->order_overhead; }

void SmoothMap::check_domain(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != impl_->domain_dim)
    throw std::invalid_argument("SmoothMap '" + impl_->name + "': expected " + std::to_string(impl_->domain_dim) +
                                " inputs, got " + std::to_string(z.size()));
  if (!impl_->domain.contains(z))
    throw DomainError("SmoothMap '" + impl_->name + "' evaluated outside its domain at " + format_point(z));
}

std::vector<Jet> SmoothMap::expand(std::span<const double> z0, int order) const {
  check_domain(z0);
  const int required = order + impl_->order_overhead;
  if (required > jets::kMaxOrder) throw JetOrderError(required, jets::kMaxOrder);
  if (impl_->expander) {
    std::vector<Jet> out;
    if (impl_->cache->lookup(z0, order, out)) return out;
    out = impl_->expander(z0, order);
    impl_->cache->store(z0, order, out);
    return out;
  }
  const auto vars = variables(z0, order);
  return impl_->eval(vars);
}

std::vector<Jet> SmoothMap::operator()(std::span<const Jet> z) const {
  const auto z0 = values(z);
  check_domain(z0);
  if (impl_->expander) {
    const int order = z.empty() ? 0 : z[0].order();
    auto local = expand(z0, order);
    if (z.empty()) return local;
    return compose(local, z);
  }
  return impl_->eval(z);
}

std::vector<double> SmoothMap::operator()(std::span<const double> z) const {
  return values(expand(z, 0));
}

SmoothMap SmoothMap::renamed(std::string name) const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->name = std::move(name);
  SmoothMap m;
  m.impl_ = std::move(impl);
  return m;
}

}  // namespace finslab

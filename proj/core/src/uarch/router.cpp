#include "neura/uarch.hpp"

namespace neura::uarch {

Router::Router(std::uint32_t id, std::uint32_t n_ports, std::uint32_t depth)
    : id_(id), depth_(depth), in_(n_ports), rr_(n_ports, 0) {}

}  // namespace neura::uarch

#include "tmc/error.hpp"

#include <exception>

namespace tmc {

void rethrow_tagged(const std::string& phase) {
    try {
        throw;
    } catch (const Error& e) {
        auto detail = e.detail();
        if (!detail.is_object()) detail = {{"detail", detail}};
        if (!detail.contains("phase")) detail["phase"] = phase;
        throw Error(e.kind(), e.code(), phase + ": " + e.what(), std::move(detail));
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Internal, "InternalError", phase + ": " + e.what(),
                    {{"phase", phase}});
    }
}

}  // namespace tmc

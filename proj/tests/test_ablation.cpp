#include <doctest.h>

#include "ism/ablation.hpp"
#include "ism/errors.hpp"

TEST_CASE("ablation table round trips through its JSON form") {
    using namespace ism;
    AblationTable table;
    table.rows.push_back({"baseline", 7, 0.5, 0.625, 0.75, 0.40625, 0.3125});
    table.rows.push_back({"both", 7, 0.75, 0.875, 1.0, 0.5625, 0.125});
    table.averages.push_back({"baseline", 0, 0.5, 0.625, 0.75, 0.40625, 0.3125});
    const AblationTable back = table_from_json(table_to_json(table));
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].variant == "baseline");
    CHECK(back.rows[0].seed == 7);
    CHECK(back.rows[0].rank1 == 0.5);
    CHECK(back.rows[1].overlap == 0.125);
    CHECK(back.averages.size() == 1);
    CHECK(back.averages[0].map == 0.40625);
    CHECK_THROWS_AS(table_from_json("not json"), ParseError);
}

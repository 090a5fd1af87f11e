from nlbeam.registry import (CATEGORICAL, ENTITY_BY_NAME, ENTITY_TYPES,
                             GAZETTEER, LABEL_INDEX, LABELS, POINT, SCALAR,
                             entity_of_label, split_label)


def test_twenty_entity_types():
    assert len(ENTITY_TYPES) == 20
    assert len({e.name for e in ENTITY_TYPES}) == 20


def test_label_set_shape():
    # O plus a B-/I- pair per entity type
    assert len(LABELS) == 41
    assert LABELS[0] == "O"
    for e in ENTITY_TYPES:
        assert f"B-{e.name}" in LABELS
        assert f"I-{e.name}" in LABELS
    assert [LABEL_INDEX[lab] for lab in LABELS] == list(range(41))


def test_registry_order_is_stable():
    # B-/I- pairs appear in registry order after O
    expected = ["O"]
    for e in ENTITY_TYPES:
        expected += [f"B-{e.name}", f"I-{e.name}"]
    assert list(LABELS) == expected


def test_split_label():
    assert split_label("O") == ("O", None)
    assert split_label("B-SCAN") == ("B", "SCAN")
    assert split_label("I-TRATE-MIN") == ("I", "TRATE-MIN")
    assert entity_of_label("B-ANGLE").name == "ANGLE"


def test_scalar_ranges_match_reference_tables():
    checks = {
        "ETIME": (1, 200, 1),
        "ANGLE": (0.05, 0.5, 0.01),
        "XPOS-REL": (-100, 100, 0.1),
        "TEMPERATURE": (-200, 599.9, 0.1),
        "NRAMP-MIN": (1, 200, 1),
        "TRATE-SEC": (1, 200, 1),
        "HUMIDITY": (0, 100, 1),
        "AMOUNT": (1, 100, 1),
    }
    for name, (low, high, step) in checks.items():
        e = ENTITY_BY_NAME[name]
        assert e.value_kind == SCALAR
        assert (e.low, e.high, e.step) == (low, high, step)


def test_categorical_word_lists():
    scan = ENTITY_BY_NAME["SCAN"]
    assert scan.value_kind == CATEGORICAL
    for word in ("scan", "measure", "measurement", "snapshot"):
        assert word in scan.words
    assert set(ENTITY_BY_NAME["PROCESS"].words) == {
        "GISAXS", "TSAXS", "GIWAXS", "TWAXS"}
    assert set(ENTITY_BY_NAME["DIRECTION"].words) >= {"x", "y"}


def test_point_entity():
    e = ENTITY_BY_NAME["POINT-ABS"]
    assert e.value_kind == POINT
    assert (e.low, e.high) == (-50, 50)


def test_gazetteer_lowercased_and_points_at_entities():
    for word, entities in GAZETTEER.items():
        assert word == word.lower()
        for name in entities:
            assert name in ENTITY_BY_NAME
    assert "gisaxs" in GAZETTEER

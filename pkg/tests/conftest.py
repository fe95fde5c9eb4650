import pytest

# The 12-row dataset snapshot used across ingest/monitor tests. entry_ids
# 1899 and 1901 are genuinely absent in the source data.
SNAPSHOT_CSV = """\
created_at,entry_id,temperature,turbidity,dissolved_o2,ph,ammonia,nitrate,population,fish_length,fish_weight
2021-06-19:00:00:05,1889,24.875,100,4.505,8.43365,0.45842,193,50,7.11,2.91
2021-06-19:00:01:02,1890,24.9375,100,6.601,8.43818,0.45842,194,50,7.11,2.91
2021-06-19:00:01:22,1891,24.875,100,15.797,8.42457,0.45842,192,50,7.11,2.91
2021-06-19:00:01:44,1892,24.9375,100,5.046,8.43365,0.45842,193,50,7.11,2.91
2021-06-19:00:02:07,1893,24.9375,100,38.407,8.40641,0.45842,192,50,7.11,2.91
2021-06-19:00:02:27,1894,24.9375,100,3.862,8.42003,0.45842,193,50,7.11,2.91
2021-06-19:00:02:47,1895,24.875,100,2.831,8.43818,0.45842,194,50,7.11,2.91
2021-06-19:00:03:07,1896,24.9375,100,5.012,8.42911,0.45842,193,50,7.11,2.91
2021-06-19:00:03:27,1897,24.9375,100,2.916,8.42911,0.45842,192,50,7.11,2.91
2021-06-19:00:03:47,1898,24.875,100,17.005,8.43365,0.45842,192,50,7.11,2.91
2021-06-19:00:04:31,1900,24.875,100,6.964,8.48358,0.45842,191,50,7.11,2.91
2021-06-19:00:05:11,1902,24.9375,100,3.465,8.42911,0.45842,187,50,7.11,2.91
"""


@pytest.fixture
def snapshot_csv():
    return SNAPSHOT_CSV


@pytest.fixture
def snapshot_path(tmp_path, snapshot_csv):
    path = tmp_path / "snapshot.csv"
    path.write_text(snapshot_csv)
    return path


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(rep, "when", "call") == "call":
                reports.append(rep)
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for rep in sorted(reports, key=lambda r: r.nodeid):
        name = rep.nodeid.split("::")[-1]
        status = "PASS" if rep.passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")

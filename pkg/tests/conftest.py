import pytest

from pabo.engine import Simulator
from pabo.fabric import OutputPort
from pabo.model import Frame, MacAddr


class StubNet:
    """Just enough of a running network for driving nodes by hand."""

    def __init__(self, seed=1, tracer=None):
        self.sim = Simulator(seed)
        self.tracer = tracer
        self.dropped, self.bounced, self.delivered, self.created = [], [], [], []
        self._id = 0

    def next_frame_id(self):
        self._id += 1
        return self._id

    def on_drop(self, f, node):
        self.dropped.append((f, node.name))

    def on_bounce(self, f, node):
        self.bounced.append((f, node.name))

    def on_deliver(self, f, host):
        self.delivered.append((f, host.name))

    def on_create(self, f, node):
        self.created.append(f)


def attach(node, net, n_ports, normal=10, bounce=10, theta=1.0):
    node.net = net
    for i in range(n_ports):
        node.add_port(OutputPort(node, i, normal, bounce, 1e9, 0, theta))
    return node


DST = MacAddr.parse("0A-AA-0A-00-00-04")
SRC = MacAddr.parse("0A-AA-0A-00-00-01")


def data(i=1, seq=0):
    return Frame(i, SRC, DST, "H1->H4", seq)


@pytest.fixture
def stub_net():
    return StubNet()


# acceptance verdicts, printed as one line per criterion at the end of the run
VERDICTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

"""Scripted adversaries shared by the test modules."""
from quadba.messages import Message, statement
from quadba.simnet import Adversary


class Scripted(Adversary):
    """Corrupt ``parties`` up front.

    ``script[(round, kind)]`` maps a recipient to the value a corrupted party
    sends it (``None`` for nothing); everything not scripted follows the
    honest suggestion of the corrupted party's own machine.
    """

    name = "scripted"

    def __init__(self, parties, script=None, instance=None):
        self.parties = list(parties)
        self.script = dict(script or {})
        self.instance = instance

    def initial_corruptions(self):
        return self.parties

    def on_round(self, view):
        for p in sorted(view.shadow):
            scripted = set()
            for (rnd, kind), plan in self.script.items():
                if rnd != view.round:
                    continue
                scripted.add(kind)
                instance = self.instance_for(view, p, kind)
                for r, v in sorted(plan.items()):
                    if v is not None:
                        view.send(p, [r], self.make(view, p, instance, kind, v))
            for out in view.shadow[p]:
                if out.message.kind not in scripted:
                    view.forward(p, out)

    def instance_for(self, view, p, kind):
        if self.instance is not None:
            return self.instance
        for out in view.shadow.get(p, []):
            return out.message.instance
        return "gba"

    def make(self, view, p, instance, kind, value):
        if kind == "ds":
            return Message(instance, kind, value, (view.sign(p, statement(instance, kind, value)),))
        return view.vote(p, instance, kind, value)

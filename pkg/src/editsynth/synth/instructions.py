"""Instruction templates: per-edit-type paraphrase banks and rendering."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

import numpy as np

from ..layout import as_generator


class TemplateError(ValueError):
    """Raised when a pattern renders with an unbound placeholder."""


@dataclass(frozen=True)
class InstructionTemplate:
    pattern: str
    edit_type: str
    verbosity: str = "brief"  # "brief" | "detailed"


def subject_phrase(caption: str) -> str:
    """Subject noun phrase of a caption: article and final period stripped."""
    phrase = caption.strip().rstrip(".")
    lowered = phrase.lower()
    for article in ("a ", "an ", "the "):
        if lowered.startswith(article):
            phrase = phrase[len(article):]
            break
    return phrase.strip()


def _bank(edit_type: str, brief: list[str], detailed: list[str] = ()) -> tuple[InstructionTemplate, ...]:
    templates = [InstructionTemplate(p, edit_type, "brief") for p in brief]
    templates += [InstructionTemplate(p, edit_type, "detailed") for p in detailed]
    return tuple(templates)


TEMPLATE_BANKS: dict[str, tuple[InstructionTemplate, ...]] = {
    "remove": _bank(
        "remove",
        [
            "remove the {subject}",
            "delete the {subject}",
            "erase the {subject} from the image",
            "take out the {subject}",
            "get rid of the {subject}",
            "make the {subject} disappear",
        ],
        [
            "remove the {subject} from the scene",
            "clear away the {subject}",
        ],
    ),
    "add": _bank(
        "add",
        [
            "add a {subject}",
            "add a {subject} to the scene",
            "insert a {subject}",
            "place a {subject} in the image",
            "put a {subject} into the picture",
            "include a {subject}",
        ],
        [
            "add one {subject} to the image",
            "draw in a {subject}",
        ],
    ),
    "replace": _bank(
        "replace",
        [
            "replace the {subject} with a {new_subject}",
            "swap the {subject} for a {new_subject}",
            "change the {subject} into a {new_subject}",
            "substitute a {new_subject} for the {subject}",
            "turn the {subject} into a {new_subject}",
            "switch the {subject} to a {new_subject}",
        ],
        [
            "exchange the {subject} with a {new_subject}",
            "replace the {subject} by a {new_subject}",
        ],
    ),
    "quantity": _bank(
        "quantity",
        [
            "change the number of {subject} copies to {count}",
            "make it {count} copies of the {subject}",
            "set the count of the {subject} to {count}",
            "show exactly {count} of the {subject}",
            "adjust the quantity of the {subject} to {count}",
            "there should be {count} copies of the {subject}",
            "update the number of {subject} copies to {count}",
            "the image should contain {count} of the {subject}",
        ],
    ),
    "color": _bank(
        "color",
        [
            "change the {color_a} {shape} to {color_b}",
            "make the {color_a} {shape} {color_b}",
            "recolor the {color_a} {shape} to {color_b}",
            "turn the {color_a} {shape} {color_b}",
            "paint the {color_a} {shape} {color_b}",
            "change the color of the {color_a} {shape} to {color_b}",
            "the {color_a} {shape} should be {color_b}",
            "give the {color_a} {shape} a {color_b} color",
        ],
    ),
    "size": _bank(
        "size",
        [
            "make the {subject} {direction}",
            "make the {subject} look {direction}",
            "scale the {subject} to be {direction}",
            "the {subject} should be {direction}",
            "resize the {subject} to be {direction}",
            "render the {subject} {direction}",
        ],
        [
            "adjust the size of the {subject} to be {direction}",
            "make the {subject} noticeably {direction}",
        ],
    ),
    "seg_detect_mask": _bank(
        "seg_detect",
        [
            "segment the {subject} in {color}",
            "paint a {color} segmentation mask over the {subject}",
            "highlight the {subject} with a {color} mask",
            "overlay a {color} mask on the {subject}",
            "fill the {subject} with {color}",
            "mark the {subject} region in {color}",
            "apply a {color} mask to the {subject}",
            "color the {subject} silhouette {color}",
        ],
    ),
    "seg_detect_bbox": _bank(
        "seg_detect",
        [
            "draw a {color} box around the {subject}",
            "put a {color} bounding box around the {subject}",
            "outline the {subject} with a {color} rectangle",
            "mark the {subject} with a {color} bounding box",
            "detect the {subject} and box it in {color}",
            "surround the {subject} with a {color} box",
            "frame the {subject} in {color}",
            "draw a {color} rectangle around the {subject}",
        ],
    ),
    "background": _bank(
        "background",
        [
            "change the background to {bg_subject}",
            "replace the background with {bg_subject}",
            "set the background to {bg_subject}",
            "swap the background for {bg_subject}",
            "make the background {bg_subject}",
            "use {bg_subject} as the background",
        ],
        [
            "put the scene in front of {bg_subject}",
            "move the scene onto {bg_subject}",
        ],
    ),
    "position": _bank(
        "position",
        [
            "move the {subject} {direction}",
            "shift the {subject} {direction}",
            "slide the {subject} {direction}",
            "push the {subject} {direction}",
            "nudge the {subject} {direction}",
            "move the {subject} further {direction}",
        ],
        [
            "relocate the {subject} {direction} in the frame",
            "move the {subject} a bit {direction}",
        ],
    ),
    "text_remove": _bank(
        "text_remove",
        [
            'remove the text "{text}"',
            'delete the word "{text}"',
            'erase the text "{text}"',
            'take the text "{text}" out of the image',
            'clear the text "{text}"',
            'remove the writing "{text}"',
            'get rid of the text "{text}"',
            'wipe the text "{text}" away',
        ],
    ),
    "text_add": _bank(
        "text_add",
        [
            'add the text "{text}"',
            'write "{text}" on the image',
            'insert the text "{text}"',
            'put the word "{text}" in the picture',
            'add the caption "{text}"',
            'place the text "{text}" on the image',
            'render the text "{text}"',
            'stamp "{text}" onto the scene',
        ],
    ),
    "text_replace": _bank(
        "text_replace",
        [
            'replace the text "{text}" with "{new_text}"',
            'change the text "{text}" to "{new_text}"',
            'swap the text "{text}" for "{new_text}"',
            'rewrite "{text}" as "{new_text}"',
            'substitute "{new_text}" for "{text}"',
            'change the word "{text}" into "{new_text}"',
            'update the text "{text}" to read "{new_text}"',
            'turn the text "{text}" into "{new_text}"',
        ],
    ),
    "video_remove": _bank(
        "video_remove",
        [
            "remove the {subject} from the video",
            "delete the {subject} throughout the clip",
            "erase the {subject} from every frame",
            "take the {subject} out of the video",
            "make the {subject} disappear from the video",
            "get rid of the {subject} in the video",
        ],
        [
            "remove the {subject} across the whole clip",
            "clear the {subject} from the footage",
        ],
    ),
    "video_add": _bank(
        "video_add",
        [
            "add a {subject} to the video",
            "insert a {subject} into the clip",
            "place a {subject} in every frame",
            "put a {subject} into the footage",
            "add a {subject} throughout the video",
            "include a {subject} in the clip",
        ],
        [
            "composite a {subject} into the video",
            "introduce a {subject} into the scene",
        ],
    ),
    "video_replace": _bank(
        "video_replace",
        [
            "replace the {subject} with a {new_subject} in the video",
            "swap the {subject} for a {new_subject} throughout the clip",
            "change the {subject} into a {new_subject} in every frame",
            "substitute a {new_subject} for the {subject} in the video",
            "turn the {subject} into a {new_subject} across the clip",
            "switch the {subject} to a {new_subject} for the whole video",
        ],
        [
            "exchange the {subject} with a {new_subject} in the footage",
            "replace the {subject} by a {new_subject} in all frames",
        ],
    ),
}

_FORMATTER = string.Formatter()
_ARTICLE_RE = re.compile(r"\b([Aa]) (?=[aeiouAEIOU])")


def _fix_articles(text: str) -> str:
    return _ARTICLE_RE.sub(lambda m: m.group(1) + "n ", text)


def render_template(template: InstructionTemplate, bindings: dict) -> str:
    """Fill a pattern; every placeholder must be bound. Indefinite articles
    agree with the vowel onset of whatever got bound after them."""
    for _, name, _, _ in _FORMATTER.parse(template.pattern):
        if name is None:
            continue
        if name not in bindings:
            raise TemplateError(
                f"unbound placeholder {name!r} in pattern {template.pattern!r}"
            )
    return _fix_articles(template.pattern.format(**bindings))


def build_instruction(
    bank_key: str,
    bindings: dict,
    rng,
    banks: dict[str, tuple[InstructionTemplate, ...]] | None = None,
) -> str:
    """Render one instruction from a uniformly chosen bank template.

    When the chosen template asks for the detailed register and the
    bindings carry subject_detailed, it substitutes for subject.
    """
    banks = banks or TEMPLATE_BANKS
    try:
        bank = banks[bank_key]
    except KeyError:
        raise TemplateError(f"no template bank for {bank_key!r}") from None
    gen = as_generator(rng)
    template = bank[int(gen.integers(len(bank)))]
    bound = dict(bindings)
    if template.verbosity == "detailed" and bound.get("subject_detailed"):
        bound["subject"] = bound["subject_detailed"]
    return render_template(template, bound)

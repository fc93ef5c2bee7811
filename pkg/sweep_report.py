import io
from typing import List, Optional

import pandas as pd
from docx import Document
from docx.enum.text import WD_ALIGN_PARAGRAPH
from docx.oxml import OxmlElement
from docx.oxml.ns import qn
from docx.shared import Pt, RGBColor

from checks import ClaimCheck
from experiments import SweepResult

COLOR_SUCCESS = RGBColor.from_string("006400")  # Dark Green
COLOR_FAILURE = RGBColor.from_string("8B0000")  # Dark Red
COLOR_BLACK = RGBColor.from_string("000000")

TARGET_FONT_NAME = "Calibri"
TARGET_FONT_SIZE = Pt(10)

# Word tables get slow and unreadable beyond this; the CSV carries everything
MAX_TABLE_ROWS = 200

TITLES = {
    "relay-sweep": "Relay position sweep",
    "mode-gain": "Mode-selection gain over static DC",
    "utility-region": "Relay utility region",
}


def add_styled_heading(document, text, level=1, section_number=""):
    prefix = f"{section_number} " if section_number else ""
    heading = document.add_heading(f"{prefix}{text}", level=level)
    for run in heading.runs:
        run.font.bold = True
    heading.paragraph_format.space_after = Pt(6)
    return heading


def add_styled_paragraph(document, text, bold=False, italic=False, color=COLOR_BLACK, alignment=WD_ALIGN_PARAGRAPH.LEFT):
    p = document.add_paragraph()
    run = p.add_run(text)
    run.bold = bold
    run.italic = italic
    if color:
        run.font.color.rgb = color
    p.alignment = alignment
    p.paragraph_format.space_after = Pt(4)
    return p


def format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def add_df_to_table(document, df: pd.DataFrame, title: Optional[str] = None):
    if title:
        p_title = document.add_paragraph()
        p_title.add_run(title).font.bold = True
        p_title.paragraph_format.space_after = Pt(4)

    if df.empty:
        add_styled_paragraph(document, "No data", italic=True)
        return

    table = document.add_table(rows=1, cols=len(df.columns))
    table.style = "Table Grid"
    for i, col_name in enumerate(df.columns):
        cell = table.rows[0].cells[i]
        cell.text = str(col_name)
        cell.paragraphs[0].runs[0].font.bold = True

    for row in df.itertuples(index=False):
        cells = table.add_row().cells
        for i, value in enumerate(row):
            cells[i].text = format_cell(value)
    document.add_paragraph()


def add_page_numbers(document):
    for section in document.sections:
        footer = section.footer
        p = footer.paragraphs[0] if footer.paragraphs else footer.add_paragraph()
        p.alignment = WD_ALIGN_PARAGRAPH.CENTER
        begin = OxmlElement("w:fldChar")
        begin.set(qn("w:fldCharType"), "begin")
        instr = OxmlElement("w:instrText")
        instr.set(qn("xml:space"), "preserve")
        instr.text = "PAGE"
        end = OxmlElement("w:fldChar")
        end.set(qn("w:fldCharType"), "end")
        run = p.add_run()
        run.element.append(begin)
        run.element.append(instr)
        run.element.append(end)


def generate_sweep_report(result: SweepResult, claims: List[ClaimCheck], created: Optional[str] = None) -> io.BytesIO:
    """
    Word summary of one experiment: metadata, claim outcomes and the result table.

    Tables longer than MAX_TABLE_ROWS are truncated with a note.
    """
    document = Document()
    style = document.styles["Normal"]
    style.font.name = TARGET_FONT_NAME
    style.font.size = TARGET_FONT_SIZE

    title_p = document.add_paragraph()
    title_p.add_run(TITLES.get(result.experiment, result.experiment)).font.bold = True
    title_p.alignment = WD_ALIGN_PARAGRAPH.CENTER
    title_p.paragraph_format.space_after = Pt(12)

    add_styled_heading(document, "Run", level=2, section_number="1.")
    meta = pd.DataFrame(
        [line[2:].split(": ", 1) for line in result.metadata_lines(created)],
        columns=["field", "value"],
    )
    add_df_to_table(document, meta)

    add_styled_heading(document, "Claims", level=2, section_number="2.")
    if claims:
        for claim in claims:
            mark = "PASS" if claim.passed else "FAIL"
            add_styled_paragraph(document, f"[{mark}] {claim.name}", bold=True,
                                 color=COLOR_SUCCESS if claim.passed else COLOR_FAILURE)
            p = add_styled_paragraph(document, claim.detail)
            p.paragraph_format.left_indent = Pt(18)
    else:
        add_styled_paragraph(document, "No claims registered for this experiment", italic=True)

    add_styled_heading(document, "Results", level=2, section_number="3.")
    table = result.to_frame()
    if len(table) > MAX_TABLE_ROWS:
        add_styled_paragraph(document, f"First {MAX_TABLE_ROWS} of {len(table)} rows; see the CSV for the rest.",
                             italic=True)
        table = table.head(MAX_TABLE_ROWS)
    add_df_to_table(document, table)

    add_page_numbers(document)

    file_stream = io.BytesIO()
    document.save(file_stream)
    file_stream.seek(0)
    return file_stream

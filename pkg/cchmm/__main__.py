from cchmm.main import cli

cli(prog_name="cchmm")

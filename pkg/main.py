from app.ui.cli import cli


def main():
    cli(prog_name="raypos")


if __name__ == "__main__":
    main()
